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

#include "dough/geometry/sdf.hpp"

#include "dough/errors.hpp"

namespace dough {

SdfPrimitive SdfPrimitive::sphere(double radius) {
  SdfPrimitive p;
  p.kind = SdfKind::kSphere;
  p.radius = radius;
  p.validate();
  return p;
}

SdfPrimitive SdfPrimitive::box(const Vec3& half_extents, double rounding) {
  SdfPrimitive p;
  p.kind = SdfKind::kBox;
  p.half_extents = half_extents;
  p.rounding = rounding;
  p.validate();
  return p;
}

SdfPrimitive SdfPrimitive::capsule(double radius, double half_length) {
  SdfPrimitive p;
  p.kind = SdfKind::kCapsule;
  p.radius = radius;
  p.half_length = half_length;
  p.validate();
  return p;
}

SdfPrimitive SdfPrimitive::cylinder(double radius, double half_height) {
  SdfPrimitive p;
  p.kind = SdfKind::kCylinder;
  p.radius = radius;
  p.half_length = half_height;
  p.validate();
  return p;
}

SdfPrimitive SdfPrimitive::plate_pair(const Vec3& plate_half_extents,
                                      double gap) {
  SdfPrimitive p;
  p.kind = SdfKind::kPlatePair;
  p.half_extents = plate_half_extents;
  p.gap = gap;
  p.validate();
  return p;
}

void SdfPrimitive::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw DomainError(msg);
  };
  switch (kind) {
    case SdfKind::kSphere:
      require(radius > 0.0, "sphere radius must be positive");
      break;
    case SdfKind::kBox:
      require((half_extents.array() > 0.0).all(), "box extents must be positive");
      require(rounding >= 0.0 && rounding <= half_extents.minCoeff(),
              "box rounding must lie in [0, smallest half extent]");
      break;
    case SdfKind::kCapsule:
      require(radius > 0.0 && half_length >= 0.0, "capsule geometry must be positive");
      break;
    case SdfKind::kCylinder:
      require(radius > 0.0 && half_length > 0.0, "cylinder geometry must be positive");
      break;
    case SdfKind::kPlatePair:
      require((half_extents.array() > 0.0).all() && gap >= 0.0,
              "plate pair geometry must be positive");
      break;
  }
  require(rotation.allFinite() && translation.allFinite(), "pose must be finite");
}

double SdfPrimitive::distance(const Vec3& world) const {
  return sample(world).distance;
}

SdfSample<double> SdfPrimitive::sample(const Vec3& world) const {
  const Vec3 local_p = rotation.transpose() * (world - translation);
  SdfSample<double> s = local<double>(local_p, gap);
  s.normal = rotation * s.normal;
  return s;
}

Vec3 SdfPrimitive::bounding_half_extents() const {
  switch (kind) {
    case SdfKind::kSphere:
      return Vec3::Constant(radius);
    case SdfKind::kBox:
      return half_extents;
    case SdfKind::kCapsule:
      return {radius, radius, radius + half_length};
    case SdfKind::kCylinder:
      return {radius, half_length, radius};
    case SdfKind::kPlatePair:
      return {0.5 * gap + 2.0 * half_extents.x(), half_extents.y(), half_extents.z()};
  }
  return Vec3::Zero();
}

double SdfPrimitive::half_height() const {
  const Vec3 h = bounding_half_extents();
  return rotation.row(1).cwiseAbs().dot(h);
}

std::vector<double> sdf_eval(const SdfPrimitive& prim, const PointCloud& points) {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(prim.distance(p));
  return out;
}

}  // namespace dough
