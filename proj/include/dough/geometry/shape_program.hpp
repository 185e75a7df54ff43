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

#pragma once

#include <cstdint>
#include <memory>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "dough/geometry/point_cloud.hpp"

namespace dough {

// Volumetric primitives of the shape DSL. Dimensions are full lengths unless
// the field says radius or half extent.

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Box {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
};

struct Cylinder {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  double height = 1.0;
  Vec3 axis = Vec3::UnitY();
};

struct Torus {
  Vec3 center = Vec3::Zero();
  double major_radius = 1.0;
  double minor_radius = 0.25;
  Vec3 axis = Vec3::UnitY();
};

/// Axis-aligned ellipsoid ("flattened sphere").
struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Vec3 radii = Vec3::Ones();
};

using Primitive = std::variant<Sphere, Box, Cylinder, Torus, Ellipsoid>;

class ShapeProgram;

struct Union {
  std::vector<ShapeProgram> children;
};

struct Translate {
  Vec3 offset = Vec3::Zero();
  std::shared_ptr<const ShapeProgram> child;
};

struct Rotate {
  Vec3 axis = Vec3::UnitY();
  double angle_deg = 0.0;
  std::shared_ptr<const ShapeProgram> child;
};

/// Immutable tree of primitives combined by union and rigid transforms.
///
/// JSON form (`dsl_version` 1):
///
///   {"dsl_version": 1, "shape": NODE}
///   NODE := {"type": "sphere",    "center": [x,y,z], "radius": r}
///         | {"type": "box",       "center": [..], "half_extents": [..]}
///         | {"type": "cylinder",  "center": [..], "radius": r,
///            "height": h, "axis": [..]}
///         | {"type": "torus",     "center": [..], "major_radius": R,
///            "minor_radius": r, "axis": [..]}
///         | {"type": "ellipsoid", "center": [..], "radii": [..]}
///         | {"type": "union",     "children": [NODE, ...]}
///         | {"type": "translate", "offset": [..], "child": NODE}
///         | {"type": "rotate",    "axis": [..], "angle_deg": a, "child": NODE}
class ShapeProgram {
 public:
  static constexpr int kDslVersion = 1;

  using Node =
      std::variant<Sphere, Box, Cylinder, Torus, Ellipsoid, Union, Translate,
                   Rotate>;

  ShapeProgram(Node node) : node_(std::move(node)) {}  // NOLINT implicit
  template <class T>
    requires std::is_constructible_v<Node, T&&> &&
             (!std::is_same_v<std::remove_cvref_t<T>, Node>) &&
             (!std::is_same_v<std::remove_cvref_t<T>, ShapeProgram>)
  ShapeProgram(T&& alt) : node_(std::forward<T>(alt)) {}  // NOLINT implicit

  static ShapeProgram union_of(std::vector<ShapeProgram> children);
  static ShapeProgram translate(const Vec3& offset, ShapeProgram child);
  static ShapeProgram rotate(const Vec3& axis, double angle_deg,
                             ShapeProgram child);

  const Node& node() const { return node_; }

  /// Full document including `dsl_version`.
  nlohmann::json to_json() const;
  /// Accepts a full document or a bare node. Throws InvalidShape.
  static ShapeProgram from_json(const nlohmann::json& doc);

  friend bool operator==(const ShapeProgram& a, const ShapeProgram& b) {
    return a.to_json() == b.to_json();
  }

 private:
  Node node_;
};

/// A primitive with its accumulated world transform.
struct PlacedPrimitive {
  Primitive shape;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Aabb bounds;

  bool contains(const Vec3& world) const;
  double volume() const;
};

/// Flattened, validated program ready for containment queries.
class CompiledShape {
 public:
  /// Throws InvalidShape for nonpositive dimensions, degenerate axes, spindle
  /// tori, empty unions or missing children.
  explicit CompiledShape(const ShapeProgram& program);

  const std::vector<PlacedPrimitive>& parts() const { return parts_; }
  const Aabb& bounds() const { return bounds_; }
  bool contains(const Vec3& p) const;
  /// Index of the first part containing p, or -1.
  int owner(const Vec3& p) const;

 private:
  std::vector<PlacedPrimitive> parts_;
  Aabb bounds_;
};

struct VolumeEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
};

/// Uniform-by-volume rejection sampling; deterministic for a fixed seed.
PointCloud sample_shape(const ShapeProgram& program, std::size_t n,
                        std::uint64_t seed);

/// Uniform-by-area sampling of the cross-section z = plane_z, used by the
/// planar simulator mode. Output points carry z = plane_z.
PointCloud sample_shape_slice(const ShapeProgram& program, std::size_t n,
                              std::uint64_t seed, double plane_z = 0.0);

inline constexpr std::size_t kDefaultVolumeSamples = 1'000'000;

/// Analytic for a single primitive or for parts with pairwise disjoint
/// bounds; Monte Carlo with a standard error otherwise.
VolumeEstimate shape_volume(const ShapeProgram& program,
                            std::size_t mc_samples = kDefaultVolumeSamples,
                            std::uint64_t seed = 0);

/// |v_out - v_in| / v_in. Throws DomainError for v_in <= 0.
double relative_volume_change(double v_in, double v_out);

}  // namespace dough
