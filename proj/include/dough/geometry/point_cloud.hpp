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

#include <span>
#include <vector>

#include <Eigen/Core>

namespace dough {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Ordered set of particle positions in meters. Index i is the
/// correspondence key between clouds derived from one another, so every
/// transform here preserves size and order.
class PointCloud {
 public:
  /// Throws DomainError when `points` is empty or holds non-finite values.
  explicit PointCloud(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  const Vec3& operator[](std::size_t i) const { return points_[i]; }
  std::span<const Vec3> points() const { return points_; }
  const std::vector<Vec3>& data() const { return points_; }

  auto begin() const { return points_.begin(); }
  auto end() const { return points_.end(); }

  PointCloud translated(const Vec3& offset) const;
  Vec3 centroid() const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Vec3> points_;
};

/// Per-point displacement p'_i - p_i between two index-aligned clouds.
struct DeformationField {
  std::vector<Vec3> displacement;

  /// Throws DomainError on size mismatch.
  static DeformationField between(const PointCloud& from, const PointCloud& to);
  std::size_t size() const { return displacement.size(); }
};

struct Aabb {
  Vec3 min;
  Vec3 max;

  Vec3 extent() const { return max - min; }
  Vec3 center() const { return 0.5 * (min + max); }
  double diagonal() const { return extent().norm(); }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  bool overlaps(const Aabb& other) const {
    return (min.array() < other.max.array()).all() &&
           (other.min.array() < max.array()).all();
  }
  Aabb merged(const Aabb& other) const {
    return {min.cwiseMin(other.min), max.cwiseMax(other.max)};
  }
};

Aabb aabb(const PointCloud& pc);

/// Diagonal of the AABB enclosing both clouds; the length scale used for
/// scale-relative defaults.
double combined_diagonal(const PointCloud& a, const PointCloud& b);

}  // namespace dough
