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

#include "dough/geometry/point_cloud.hpp"

#include "dough/errors.hpp"

namespace dough {

PointCloud::PointCloud(std::vector<Vec3> points) : points_(std::move(points)) {
  if (points_.empty()) throw DomainError("point cloud must not be empty");
  for (const auto& p : points_) {
    if (!p.allFinite()) throw DomainError("point cloud has non-finite point");
  }
}

PointCloud PointCloud::translated(const Vec3& offset) const {
  std::vector<Vec3> out(points_);
  for (auto& p : out) p += offset;
  return PointCloud(std::move(out));
}

Vec3 PointCloud::centroid() const {
  Vec3 sum = Vec3::Zero();
  for (const auto& p : points_) sum += p;
  return sum / static_cast<double>(points_.size());
}

DeformationField DeformationField::between(const PointCloud& from,
                                           const PointCloud& to) {
  if (from.size() != to.size()) {
    throw DomainError("deformation field needs index-aligned clouds");
  }
  DeformationField field;
  field.displacement.reserve(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) {
    field.displacement.push_back(to[i] - from[i]);
  }
  return field;
}

Aabb aabb(const PointCloud& pc) {
  Aabb box{pc[0], pc[0]};
  for (const auto& p : pc) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

double combined_diagonal(const PointCloud& a, const PointCloud& b) {
  return aabb(a).merged(aabb(b)).diagonal();
}

}  // namespace dough
