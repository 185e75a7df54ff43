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

#include "dough/transport/sinkhorn.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

#include "dough/errors.hpp"

namespace dough {

namespace {

using Points = Eigen::Matrix<double, 3, Eigen::Dynamic>;

// Plain sweeps before Newton polishing kicks in.
constexpr int kSweepsBeforeNewton = 3;
// Loose solve at each coarse annealing level.
constexpr double kLevelTolerance = 1e-3;
constexpr int kLevelBudget = 200;

Points to_matrix(std::span<const Vec3> pts) {
  Points m(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts[i];
  return m;
}

Eigen::MatrixXd half_sq_dist(const Points& x, const Points& y) {
  Eigen::MatrixXd c(x.cols(), y.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    c.row(i) = 0.5 * (y.colwise() - x.col(i)).colwise().squaredNorm();
  }
  return c;
}

// out_i = -eps * log sum_j b_j exp((h_j - c_ij) / eps), uniform b.
void softmin(const Eigen::MatrixXd& c, const Eigen::VectorXd& h, double eps,
             Eigen::VectorXd& out) {
  const Eigen::Index n = c.rows();
  const double log_b = -std::log(static_cast<double>(c.cols()));
  Eigen::ArrayXd buf(c.cols());
  out.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    buf = (h.array() - c.row(i).transpose().array()) / eps;
    const double top = buf.maxCoeff();
    out[i] = -eps * (top + std::log((buf - top).exp().sum()) + log_b);
  }
}

// L1 violation of the marginal on the side whose potential is `pot`, given
// the softmin `fresh` of the opposite potential.
double marginal_error(const Eigen::VectorXd& pot, const Eigen::VectorXd& fresh,
                      double eps) {
  const double w = 1.0 / static_cast<double>(pot.size());
  return w * (((pot - fresh).array() / eps).exp() - 1.0).abs().sum();
}

// One transport problem between two weighted clouds, cost matrix c (rows X).
struct Problem {
  Eigen::MatrixXd c, ct;
  Eigen::VectorXd f, g;
  double residual = INFINITY;
  bool done = false;

  explicit Problem(Eigen::MatrixXd cost) : c(std::move(cost)), ct(c.transpose()) {}

  // f <- T(g), g <- T(f). Returns the Y-marginal error before g moved.
  double sweep(double eps) {
    Eigen::VectorXd gt;
    softmin(c, g, eps, f);
    softmin(ct, f, eps, gt);
    const double res = marginal_error(g, gt, eps);
    g = std::move(gt);
    return res;
  }

  // Semi-dual objective in g with f = T(g).
  double semi_dual(const Eigen::VectorXd& gg, Eigen::VectorXd& ff, double eps) const {
    softmin(c, gg, eps, ff);
    return ff.mean() + gg.mean();
  }

  // Damped Newton ascent on the semi-dual. The Hessian is
  // -(diag(colsum P) - P^T diag(1/a) P) / eps, singular along constants,
  // which the rank-one term removes.
  void newton(double eps) {
    const double a = 1.0 / static_cast<double>(c.rows());
    const double b = 1.0 / static_cast<double>(c.cols());
    Eigen::VectorXd ff;
    const double val = semi_dual(g, ff, eps);
    const Eigen::MatrixXd plan =
        (a * b) * ((((-c).colwise() + ff).rowwise() + g.transpose()) / eps).array().exp().matrix();
    const Eigen::VectorXd col = plan.colwise().sum().transpose();
    Eigen::MatrixXd hess = -(plan.transpose() * plan) / a;
    hess.diagonal() += col;
    hess.array() += col.mean();
    const Eigen::VectorXd dir = eps * hess.ldlt().solve((b - col.array()).matrix());
    if (!dir.allFinite()) return;
    double t = 1.0;
    for (int k = 0; k < 20; ++k, t *= 0.5) {
      Eigen::VectorXd trial = g + t * dir;
      Eigen::VectorXd tf;
      if (semi_dual(trial, tf, eps) >= val) {
        g = std::move(trial);
        f = std::move(tf);
        return;
      }
    }
  }

  // Sweeps at one epsilon until the marginal residual drops below tol or the
  // budget is spent; Newton polishing after the first few sweeps. Returns
  // the number of sweeps used.
  int solve_level(double eps, double tol, int budget) {
    done = false;
    int k = 0;
    while (k < budget) {
      residual = sweep(eps);
      ++k;
      if (residual < tol) {
        done = true;
        break;
      }
      if (k >= kSweepsBeforeNewton) newton(eps);
    }
    return k;
  }

  // Coarse-to-fine epsilon scaling. Each coarse level is solved loosely so
  // the next starts within a few eps of its optimum.
  void anneal(double start, double eps) {
    double e = std::max(start, eps);
    g = Eigen::VectorXd::Zero(c.cols());
    while (e > eps) {
      solve_level(e, kLevelTolerance, kLevelBudget);
      e = std::max(0.25 * e, eps);
    }
  }

  double value() const { return f.mean() + g.mean(); }
};

double max_sq_diameter(const Points& x, const Points& y) {
  const Eigen::Vector3d lo = x.rowwise().minCoeff().cwiseMin(y.rowwise().minCoeff());
  const Eigen::Vector3d hi = x.rowwise().maxCoeff().cwiseMax(y.rowwise().maxCoeff());
  return (hi - lo).squaredNorm();
}

}  // namespace

SinkhornParams SinkhornParams::for_clouds(const PointCloud& x,
                                          const PointCloud& y,
                                          double blur_fraction) {
  SinkhornParams p;
  const double blur = blur_fraction * combined_diagonal(x, y);
  // Coincident single points have zero diagonal; any positive blur works.
  p.epsilon = blur > 0.0 ? blur * blur : 1e-12;
  return p;
}

void SinkhornParams::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw DomainError("sinkhorn epsilon must be positive");
  }
  if (max_iters < 1) throw DomainError("sinkhorn max_iters must be >= 1");
  if (!(tolerance > 0.0)) throw DomainError("sinkhorn tolerance must be positive");
}

SinkhornResult solve_sinkhorn(std::span<const Vec3> xs, std::span<const Vec3> ys,
                              const SinkhornParams& params,
                              const SinkhornPotentials* warm) {
  params.validate();
  if (xs.empty() || ys.empty()) throw DomainError("sinkhorn needs nonempty clouds");
  const Points x = to_matrix(xs);
  const Points y = to_matrix(ys);
  const double eps = params.epsilon;

  Problem xy(half_sq_dist(x, y));
  Problem xx(half_sq_dist(x, x));
  Problem yy(half_sq_dist(y, y));
  const bool use_warm = warm != nullptr && warm->f.size() == x.cols() &&
                        warm->p.size() == x.cols() && warm->g.size() == y.cols() &&
                        warm->q.size() == y.cols();
  if (use_warm) {
    xy.g = warm->g;
    xx.g = warm->p;
    yy.g = warm->q;
  } else {
    const double start = max_sq_diameter(x, y);
    xy.anneal(start, eps);
    xx.anneal(start, eps);
    yy.anneal(start, eps);
  }

  SinkhornResult out;
  out.iterations = std::max({xy.solve_level(eps, params.tolerance, params.max_iters),
                             xx.solve_level(eps, params.tolerance, params.max_iters),
                             yy.solve_level(eps, params.tolerance, params.max_iters)});
  out.residual = std::max({xy.residual, xx.residual, yy.residual});
  if (!(xy.done && xx.done && yy.done)) {
    throw ConvergenceError("sinkhorn did not converge in " +
                               std::to_string(params.max_iters) + " iterations",
                           out.residual);
  }
  auto& pot = out.potentials;
  pot.f = xy.f;
  pot.g = xy.g;
  // Self problems are symmetric; f and g agree at convergence.
  pot.p = xx.g;
  pot.q = yy.g;
  out.divergence = xy.value() - 0.5 * (xx.value() + yy.value());
  return out;
}

double sinkhorn_divergence(const PointCloud& x, const PointCloud& y,
                           const SinkhornParams& params) {
  return solve_sinkhorn(x.points(), y.points(), params).divergence;
}

std::vector<Vec3> emd_gradient(std::span<const Vec3> xs, std::span<const Vec3> ys,
                               double eps, const SinkhornPotentials& pot) {
  const Points x = to_matrix(xs);
  const Points y = to_matrix(ys);
  const Eigen::Index n = x.cols();
  const double a = 1.0 / static_cast<double>(n);
  std::vector<Vec3> grad(static_cast<std::size_t>(n));

  // Barycentric targets under the row-normalized plans:
  //   dS/dx_i = a_i (xbar_i - ybar_i).
  auto barycenter = [eps](const Points& src_col, const Points& tgt,
                          const Eigen::VectorXd& h) -> Vec3 {
    Eigen::ArrayXd w =
        (h.array() - 0.5 * (tgt.colwise() - src_col.col(0)).colwise().squaredNorm().transpose().array()) / eps;
    w = (w - w.maxCoeff()).exp();
    return tgt * (w / w.sum()).matrix();
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const Points xi = x.col(i);
    const Vec3 ybar = barycenter(xi, y, pot.g);
    const Vec3 xbar = barycenter(xi, x, pot.p);
    grad[static_cast<std::size_t>(i)] = a * (xbar - ybar);
  }
  return grad;
}

std::vector<Vec3> emd_gradient(const PointCloud& x, const PointCloud& y,
                               const SinkhornParams& params) {
  const auto res = solve_sinkhorn(x.points(), y.points(), params);
  return emd_gradient(x.points(), y.points(), params.epsilon, res.potentials);
}

}  // namespace dough
