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

#include "dough/geometry/point_cloud.hpp"
#include "dough/transport/sinkhorn.hpp"

namespace dough {

/// Descent in divergence space. Each of the `iterations` steps moves every
/// point by -alpha * N * dS/dp_i; N * dS/dp_i is the per-point displacement
/// toward its soft transport target, so alpha is the fraction of that
/// displacement covered per step.
struct EmdStepParams {
  double alpha = 0.1;
  int iterations = 20;

  void validate() const;
};

/// Next reachable candidate: K gradient steps of X toward Y. Output index i
/// corresponds to input index i.
PointCloud emd_step(const PointCloud& x, const PointCloud& y,
                    const SinkhornParams& sp, const EmdStepParams& ep);

/// Optimal assignment cost (mean of c(x_i, y_sigma(i))) between equal-size
/// clouds of at most 64 points. Throws DomainError otherwise.
double exact_ot_small(const PointCloud& x, const PointCloud& y);

/// Minimum-cost perfect assignment for a square cost matrix; returns the
/// column assigned to each row.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost);

}  // namespace dough
