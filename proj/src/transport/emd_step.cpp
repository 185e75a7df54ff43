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

#include "dough/transport/emd_step.hpp"

#include <limits>

#include "dough/errors.hpp"

namespace dough {

void EmdStepParams::validate() const {
  if (!(alpha > 0.0)) throw DomainError("emd step alpha must be positive");
  if (iterations < 1) throw DomainError("emd step iterations must be >= 1");
}

PointCloud emd_step(const PointCloud& x, const PointCloud& y,
                    const SinkhornParams& sp, const EmdStepParams& ep) {
  ep.validate();
  std::vector<Vec3> pts(x.begin(), x.end());
  const double scale = ep.alpha * static_cast<double>(pts.size());
  SinkhornPotentials warm;
  bool have_warm = false;
  for (int k = 0; k < ep.iterations; ++k) {
    const auto res = solve_sinkhorn(pts, y.points(), sp, have_warm ? &warm : nullptr);
    const auto grad = emd_gradient(pts, y.points(), sp.epsilon, res.potentials);
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] -= scale * grad[i];
    warm = res.potentials;
    have_warm = true;
  }
  return PointCloud(std::move(pts));
}

// Shortest augmenting path (Jonker-Volgenant style) with row/column
// potentials, O(n^3). 1-based internals follow the classic formulation.
std::vector<int> hungarian_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw DomainError("assignment needs a square matrix");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = match[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  }
  return row_to_col;
}

double exact_ot_small(const PointCloud& x, const PointCloud& y) {
  if (x.size() != y.size()) throw DomainError("exact OT needs equal-size clouds");
  if (x.size() > 64) throw DomainError("exact OT limited to 64 points");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      cost(i, j) = 0.5 * (x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)]).squaredNorm();
    }
  }
  const auto assign = hungarian_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total += cost(i, assign[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(n);
}

}  // namespace dough
