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

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dough/geometry/point_cloud.hpp"

namespace dough {

/// Entropic OT settings. The cost is c(x, y) = |x - y|^2 / 2 throughout, so
/// `epsilon` is in squared length units.
struct SinkhornParams {
  double epsilon = 1e-4;
  int max_iters = 500;
  /// Bound on the L1 violation of either transport-plan marginal.
  double tolerance = 1e-6;

  /// epsilon = (blur_fraction * D)^2 with D the diagonal of the AABB holding
  /// both clouds.
  static SinkhornParams for_clouds(const PointCloud& x, const PointCloud& y,
                                   double blur_fraction = 0.02);

  /// Throws DomainError when a field violates its invariant.
  void validate() const;
};

/// Converged dual potentials of OT_eps(X, Y) (f on X, g on Y) and of the
/// symmetric self problems (p on X, q on Y).
struct SinkhornPotentials {
  Eigen::VectorXd f, g, p, q;
};

struct SinkhornResult {
  double divergence = 0.0;
  SinkhornPotentials potentials;
  int iterations = 0;
  double residual = 0.0;
};

/// Debiased divergence S = OT(X,Y) - OT(X,X)/2 - OT(Y,Y)/2 with uniform
/// weights. Log-domain sweeps with epsilon annealing, polished by Newton
/// steps on the semi-dual when sweeps stall. `warm` skips annealing and
/// starts from earlier potentials of same-sized clouds. `max_iters` bounds
/// the sweeps at the final epsilon. Throws ConvergenceError.
SinkhornResult solve_sinkhorn(std::span<const Vec3> x, std::span<const Vec3> y,
                              const SinkhornParams& params,
                              const SinkhornPotentials* warm = nullptr);

double sinkhorn_divergence(const PointCloud& x, const PointCloud& y,
                           const SinkhornParams& params);

/// dS/dx_i for every point of X with weights held fixed, from converged
/// potentials.
std::vector<Vec3> emd_gradient(const PointCloud& x, const PointCloud& y,
                               const SinkhornParams& params);

/// Gradient from already-converged potentials.
std::vector<Vec3> emd_gradient(std::span<const Vec3> x,
                               std::span<const Vec3> y, double epsilon,
                               const SinkhornPotentials& potentials);

}  // namespace dough
