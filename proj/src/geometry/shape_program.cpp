// Copyright 2026 The DoughPlan Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dough/geometry/shape_program.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "dough/errors.hpp"

namespace dough {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec_from(const json& node, const char* key) {
  if (!node.contains(key)) {
    throw InvalidShape(std::string("shape node missing '") + key + "'");
  }
  const json& v = node.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw InvalidShape(std::string("'") + key + "' must be a 3-vector");
  }
  Vec3 out;
  for (int k = 0; k < 3; ++k) {
    if (!v[k].is_number()) {
      throw InvalidShape(std::string("'") + key + "' must be numeric");
    }
    out[k] = v[k].get<double>();
  }
  return out;
}

double number_from(const json& node, const char* key) {
  if (!node.contains(key) || !node.at(key).is_number()) {
    throw InvalidShape(std::string("shape node missing numeric '") + key +
                       "'");
  }
  return node.at(key).get<double>();
}

json node_json(const ShapeProgram::Node& node);

json child_json(const std::shared_ptr<const ShapeProgram>& child) {
  if (!child) return nullptr;
  return node_json(child->node());
}

json node_json(const ShapeProgram::Node& node) {
  return std::visit(
      Overloaded{
          [](const Sphere& s) {
            return json{{"type", "sphere"},
                        {"center", vec_json(s.center)},
                        {"radius", s.radius}};
          },
          [](const Box& b) {
            return json{{"type", "box"},
                        {"center", vec_json(b.center)},
                        {"half_extents", vec_json(b.half_extents)}};
          },
          [](const Cylinder& c) {
            return json{{"type", "cylinder"},
                        {"center", vec_json(c.center)},
                        {"radius", c.radius},
                        {"height", c.height},
                        {"axis", vec_json(c.axis)}};
          },
          [](const Torus& t) {
            return json{{"type", "torus"},
                        {"center", vec_json(t.center)},
                        {"major_radius", t.major_radius},
                        {"minor_radius", t.minor_radius},
                        {"axis", vec_json(t.axis)}};
          },
          [](const Ellipsoid& e) {
            return json{{"type", "ellipsoid"},
                        {"center", vec_json(e.center)},
                        {"radii", vec_json(e.radii)}};
          },
          [](const Union& u) {
            json children = json::array();
            for (const auto& c : u.children) children.push_back(node_json(c.node()));
            return json{{"type", "union"}, {"children", children}};
          },
          [](const Translate& t) {
            return json{{"type", "translate"},
                        {"offset", vec_json(t.offset)},
                        {"child", child_json(t.child)}};
          },
          [](const Rotate& r) {
            return json{{"type", "rotate"},
                        {"axis", vec_json(r.axis)},
                        {"angle_deg", r.angle_deg},
                        {"child", child_json(r.child)}};
          },
      },
      node);
}

ShapeProgram node_from(const json& node, int depth) {
  if (depth > 64) throw InvalidShape("shape program nested too deeply");
  if (!node.is_object() || !node.contains("type") ||
      !node.at("type").is_string()) {
    throw InvalidShape("shape node must be an object with a string 'type'");
  }
  const auto type = node.at("type").get<std::string>();
  if (type == "sphere") {
    return Sphere{vec_from(node, "center"), number_from(node, "radius")};
  }
  if (type == "box") {
    return Box{vec_from(node, "center"), vec_from(node, "half_extents")};
  }
  if (type == "cylinder") {
    Cylinder c{vec_from(node, "center"), number_from(node, "radius"),
               number_from(node, "height")};
    if (node.contains("axis")) c.axis = vec_from(node, "axis");
    return c;
  }
  if (type == "torus") {
    Torus t{vec_from(node, "center"), number_from(node, "major_radius"),
            number_from(node, "minor_radius")};
    if (node.contains("axis")) t.axis = vec_from(node, "axis");
    return t;
  }
  if (type == "ellipsoid") {
    return Ellipsoid{vec_from(node, "center"), vec_from(node, "radii")};
  }
  if (type == "union") {
    if (!node.contains("children") || !node.at("children").is_array()) {
      throw InvalidShape("union needs a 'children' array");
    }
    std::vector<ShapeProgram> children;
    for (const auto& c : node.at("children")) {
      children.push_back(node_from(c, depth + 1));
    }
    return Union{std::move(children)};
  }
  if (type == "translate" || type == "rotate") {
    if (!node.contains("child")) {
      throw InvalidShape(type + " needs a 'child'");
    }
    auto child =
        std::make_shared<const ShapeProgram>(node_from(node.at("child"), depth + 1));
    if (type == "translate") return Translate{vec_from(node, "offset"), child};
    return Rotate{vec_from(node, "axis"), number_from(node, "angle_deg"), child};
  }
  throw InvalidShape("unknown shape type '" + type + "'");
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }
bool positive(const Vec3& v) { return v.allFinite() && (v.array() > 0.0).all(); }

Vec3 unit_axis(const Vec3& axis) {
  const double n = axis.norm();
  if (!std::isfinite(n) || n < 1e-12) throw InvalidShape("degenerate axis");
  return axis / n;
}

void validate(const Primitive& prim) {
  std::visit(Overloaded{
                 [](const Sphere& s) {
                   if (!positive(s.radius)) throw InvalidShape("sphere radius must be positive");
                 },
                 [](const Box& b) {
                   if (!positive(b.half_extents)) throw InvalidShape("box half extents must be positive");
                 },
                 [](const Cylinder& c) {
                   if (!positive(c.radius) || !positive(c.height)) {
                     throw InvalidShape("cylinder radius and height must be positive");
                   }
                   unit_axis(c.axis);
                 },
                 [](const Torus& t) {
                   if (!positive(t.major_radius) || !positive(t.minor_radius)) {
                     throw InvalidShape("torus radii must be positive");
                   }
                   if (t.minor_radius >= t.major_radius) {
                     throw InvalidShape("torus minor radius must be below major radius");
                   }
                   unit_axis(t.axis);
                 },
                 [](const Ellipsoid& e) {
                   if (!positive(e.radii)) throw InvalidShape("ellipsoid radii must be positive");
                 },
             },
             prim);
  const Vec3 center = std::visit([](const auto& p) { return p.center; }, prim);
  if (!center.allFinite()) throw InvalidShape("primitive center must be finite");
}

// Bounds in the primitive's own frame (before the placed transform).
Aabb local_bounds(const Primitive& prim) {
  return std::visit(
      Overloaded{
          [](const Sphere& s) {
            return Aabb{s.center.array() - s.radius, s.center.array() + s.radius};
          },
          [](const Box& b) {
            return Aabb{b.center - b.half_extents, b.center + b.half_extents};
          },
          [](const Cylinder& c) {
            const Vec3 a = unit_axis(c.axis);
            Vec3 half;
            for (int k = 0; k < 3; ++k) {
              half[k] = c.radius * std::sqrt(std::max(0.0, 1.0 - a[k] * a[k])) +
                        0.5 * c.height * std::abs(a[k]);
            }
            return Aabb{c.center - half, c.center + half};
          },
          [](const Torus& t) {
            const Vec3 a = unit_axis(t.axis);
            Vec3 half;
            for (int k = 0; k < 3; ++k) {
              half[k] = (t.major_radius + t.minor_radius) *
                            std::sqrt(std::max(0.0, 1.0 - a[k] * a[k])) +
                        t.minor_radius * std::abs(a[k]);
            }
            return Aabb{t.center - half, t.center + half};
          },
          [](const Ellipsoid& e) {
            return Aabb{e.center - e.radii, e.center + e.radii};
          },
      },
      prim);
}

bool local_contains(const Primitive& prim, const Vec3& p) {
  return std::visit(
      Overloaded{
          [&](const Sphere& s) {
            return (p - s.center).squaredNorm() <= s.radius * s.radius;
          },
          [&](const Box& b) {
            return ((p - b.center).cwiseAbs().array() <= b.half_extents.array()).all();
          },
          [&](const Cylinder& c) {
            const Vec3 a = c.axis.normalized();
            const Vec3 d = p - c.center;
            const double s = d.dot(a);
            return std::abs(s) <= 0.5 * c.height &&
                   (d - s * a).squaredNorm() <= c.radius * c.radius;
          },
          [&](const Torus& t) {
            const Vec3 a = t.axis.normalized();
            const Vec3 d = p - t.center;
            const double s = d.dot(a);
            const double rho = (d - s * a).norm() - t.major_radius;
            return rho * rho + s * s <= t.minor_radius * t.minor_radius;
          },
          [&](const Ellipsoid& e) {
            return ((p - e.center).cwiseQuotient(e.radii)).squaredNorm() <= 1.0;
          },
      },
      prim);
}

double primitive_volume(const Primitive& prim) {
  constexpr double pi = std::numbers::pi;
  return std::visit(
      Overloaded{
          [](const Sphere& s) { return 4.0 / 3.0 * pi * std::pow(s.radius, 3); },
          [](const Box& b) { return 8.0 * b.half_extents.prod(); },
          [](const Cylinder& c) { return pi * c.radius * c.radius * c.height; },
          [](const Torus& t) {
            return 2.0 * pi * pi * t.major_radius * t.minor_radius * t.minor_radius;
          },
          [](const Ellipsoid& e) { return 4.0 / 3.0 * pi * e.radii.prod(); },
      },
      prim);
}

Aabb transformed_bounds(const Aabb& local, const Mat3& rotation,
                        const Vec3& translation) {
  Aabb out{Vec3::Constant(INFINITY), Vec3::Constant(-INFINITY)};
  for (int corner = 0; corner < 8; ++corner) {
    Vec3 c;
    for (int k = 0; k < 3; ++k) c[k] = (corner >> k) & 1 ? local.max[k] : local.min[k];
    const Vec3 w = rotation * c + translation;
    out.min = out.min.cwiseMin(w);
    out.max = out.max.cwiseMax(w);
  }
  return out;
}

void flatten(const ShapeProgram& program, const Mat3& rotation,
             const Vec3& translation, int depth,
             std::vector<PlacedPrimitive>& out) {
  if (depth > 64) throw InvalidShape("shape program nested too deeply");
  std::visit(
      Overloaded{
          [&](const Union& u) {
            if (u.children.empty()) throw InvalidShape("union has no children");
            for (const auto& c : u.children) flatten(c, rotation, translation, depth + 1, out);
          },
          [&](const Translate& t) {
            if (!t.child) throw InvalidShape("translate has no child");
            if (!t.offset.allFinite()) throw InvalidShape("translate offset must be finite");
            flatten(*t.child, rotation, translation + rotation * t.offset, depth + 1, out);
          },
          [&](const Rotate& r) {
            if (!r.child) throw InvalidShape("rotate has no child");
            if (!std::isfinite(r.angle_deg)) throw InvalidShape("rotation angle must be finite");
            const Mat3 local =
                Eigen::AngleAxisd(r.angle_deg * std::numbers::pi / 180.0, unit_axis(r.axis))
                    .toRotationMatrix();
            flatten(*r.child, rotation * local, translation, depth + 1, out);
          },
          [&](const auto& prim) {
            Primitive p = prim;
            validate(p);
            PlacedPrimitive placed{p, rotation, translation,
                                   transformed_bounds(local_bounds(p), rotation, translation)};
            out.push_back(std::move(placed));
          },
      },
      program.node());
}

double box_measure(const Aabb& b) { return b.extent().prod(); }

double rect_measure(const Aabb& b) { return b.extent().x() * b.extent().y(); }

}  // namespace

ShapeProgram ShapeProgram::union_of(std::vector<ShapeProgram> children) {
  return Union{std::move(children)};
}

ShapeProgram ShapeProgram::translate(const Vec3& offset, ShapeProgram child) {
  return Translate{offset, std::make_shared<const ShapeProgram>(std::move(child))};
}

ShapeProgram ShapeProgram::rotate(const Vec3& axis, double angle_deg,
                                  ShapeProgram child) {
  return Rotate{axis, angle_deg,
                std::make_shared<const ShapeProgram>(std::move(child))};
}

json ShapeProgram::to_json() const {
  return json{{"dsl_version", kDslVersion}, {"shape", node_json(node_)}};
}

ShapeProgram ShapeProgram::from_json(const json& doc) {
  if (doc.is_object() && doc.contains("shape")) {
    if (doc.contains("dsl_version")) {
      const auto& v = doc.at("dsl_version");
      if (!v.is_number_integer() || v.get<int>() != kDslVersion) {
        throw InvalidShape("unsupported dsl_version");
      }
    }
    return node_from(doc.at("shape"), 0);
  }
  return node_from(doc, 0);
}

bool PlacedPrimitive::contains(const Vec3& world) const {
  if (!bounds.contains(world)) return false;
  return local_contains(shape, rotation.transpose() * (world - translation));
}

double PlacedPrimitive::volume() const { return primitive_volume(shape); }

CompiledShape::CompiledShape(const ShapeProgram& program) {
  flatten(program, Mat3::Identity(), Vec3::Zero(), 0, parts_);
  bounds_ = parts_.front().bounds;
  for (const auto& p : parts_) bounds_ = bounds_.merged(p.bounds);
}

bool CompiledShape::contains(const Vec3& p) const { return owner(p) >= 0; }

int CompiledShape::owner(const Vec3& p) const {
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    if (parts_[k].contains(p)) return static_cast<int>(k);
  }
  return -1;
}

// Each draw picks a part with probability proportional to its bounding-box
// measure and a uniform point in that box; the point is kept only when the
// chosen part is the first part containing it. Every point of the union is
// therefore produced with the same density.
PointCloud sample_shape(const ShapeProgram& program, std::size_t n,
                        std::uint64_t seed) {
  if (n == 0) throw DomainError("sample_shape needs n >= 1");
  const CompiledShape shape(program);
  std::vector<double> measures;
  for (const auto& part : shape.parts()) measures.push_back(box_measure(part.bounds));

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(measures.begin(), measures.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vec3> points;
  points.reserve(n);
  const std::size_t max_draws = 10'000 * n + 1'000'000;
  for (std::size_t draw = 0; points.size() < n; ++draw) {
    if (draw >= max_draws) throw InvalidShape("shape has negligible volume");
    const std::size_t k = pick(rng);
    const Aabb& b = shape.parts()[k].bounds;
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = b.min[a] + unit(rng) * (b.max[a] - b.min[a]);
    if (shape.owner(p) == static_cast<int>(k)) points.push_back(p);
  }
  return PointCloud(std::move(points));
}

PointCloud sample_shape_slice(const ShapeProgram& program, std::size_t n,
                              std::uint64_t seed, double plane_z) {
  if (n == 0) throw DomainError("sample_shape_slice needs n >= 1");
  const CompiledShape shape(program);
  std::vector<double> measures;
  for (const auto& part : shape.parts()) {
    const bool cut = part.bounds.min.z() <= plane_z && plane_z <= part.bounds.max.z();
    measures.push_back(cut ? rect_measure(part.bounds) : 0.0);
  }
  bool any = false;
  for (double m : measures) any = any || m > 0.0;
  if (!any) throw InvalidShape("shape does not intersect the sampling plane");

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(measures.begin(), measures.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Vec3> points;
  points.reserve(n);
  const std::size_t max_draws = 10'000 * n + 1'000'000;
  for (std::size_t draw = 0; points.size() < n; ++draw) {
    if (draw >= max_draws) throw InvalidShape("shape slice has negligible area");
    const std::size_t k = pick(rng);
    const Aabb& b = shape.parts()[k].bounds;
    const Vec3 p(b.min.x() + unit(rng) * (b.max.x() - b.min.x()),
                 b.min.y() + unit(rng) * (b.max.y() - b.min.y()), plane_z);
    if (shape.owner(p) == static_cast<int>(k)) points.push_back(p);
  }
  return PointCloud(std::move(points));
}

VolumeEstimate shape_volume(const ShapeProgram& program, std::size_t mc_samples,
                            std::uint64_t seed) {
  const CompiledShape shape(program);
  const auto& parts = shape.parts();
  bool disjoint = true;
  for (std::size_t i = 0; i < parts.size() && disjoint; ++i) {
    for (std::size_t j = i + 1; j < parts.size(); ++j) {
      if (parts[i].bounds.overlaps(parts[j].bounds)) {
        disjoint = false;
        break;
      }
    }
  }
  if (disjoint) {
    double total = 0.0;
    for (const auto& p : parts) total += p.volume();
    return {total, 0.0, true};
  }

  if (mc_samples == 0) throw DomainError("Monte Carlo volume needs samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Aabb& b = shape.bounds();
  std::size_t hits = 0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) p[a] = b.min[a] + unit(rng) * (b.max[a] - b.min[a]);
    if (shape.contains(p)) ++hits;
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(mc_samples);
  const double box = box_measure(b);
  return {box * frac,
          box * std::sqrt(frac * (1.0 - frac) / static_cast<double>(mc_samples)),
          false};
}

double relative_volume_change(double v_in, double v_out) {
  if (!(v_in > 0.0)) throw DomainError("input volume must be positive");
  return std::abs(v_out - v_in) / v_in;
}

}  // namespace dough
