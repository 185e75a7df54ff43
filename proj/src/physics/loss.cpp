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

#include "dough/physics/loss.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/AutoDiff>

#include "dough/errors.hpp"
#include "mpm.hpp"

namespace dough {

RolloutResult rollout(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                      const ActionSequence& actions, const SimConfig& cfg) {
  return cfg.dim == 2 ? mpm::rollout_impl<2>(s0, tool, pose0, actions, cfg)
                      : mpm::rollout_impl<3>(s0, tool, pose0, actions, cfg);
}

double loss_p2p(const PointCloud& current, const PointCloud& candidate) {
  if (current.size() != candidate.size()) throw DomainError("p2p loss needs equal sizes");
  double total = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    for (int k = 0; k < 3; ++k) total += std::abs(current[i][k] - candidate[i][k]);
  }
  return total;
}

namespace {

struct Closest {
  double distance = std::numeric_limits<double>::infinity();
  std::size_t index = 0;
};

Closest closest_point(const ToolSpec& tool, const ToolPose& pose, const PointCloud& cloud) {
  Closest c;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double d = tool_distance(tool, pose, cloud[i]);
    if (d < c.distance) c = {d, i};
  }
  return c;
}

}  // namespace

double sdf_proximity(const ToolSpec& tool, const ToolPose& pose, const PointCloud& cloud) {
  return std::max(closest_point(tool, pose, cloud).distance, 0.0);
}

double velocity_regularization(const ActionSequence& actions) {
  if (actions.steps() == 0) return 0.0;
  return actions.values.rowwise().squaredNorm().mean();
}

double composite_loss(const PointCloud& current, const PointCloud& candidate,
                      const ToolSpec& tool, const ToolPose& pose,
                      const ActionSequence& actions, const LossWeights& w) {
  return w.p2p * loss_p2p(current, candidate) + w.sdf * sdf_proximity(tool, pose, current) +
         w.velocity * velocity_regularization(actions);
}

namespace {

// Terminal adjoint of the p2p and proximity terms.
mpm::FinalAdjoint terminal_adjoint(const RolloutResult& r, const PointCloud& candidate,
                                   const ToolSpec& tool, const LossWeights& w) {
  mpm::FinalAdjoint fin;
  const auto& x = r.state.x;
  fin.x.assign(x.size(), Vec3::Zero());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      const double d = x[i][k] - candidate[i][k];
      fin.x[i][k] = w.p2p * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
    }
  }
  const PointCloud cloud(x);
  const Closest c = closest_point(tool, r.pose, cloud);
  if (c.distance > 0.0 && w.sdf != 0.0) {
    // d/dp sdf(R^T (p - q), gap) with p, q and gap as dual numbers.
    using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, 7, 1>>;
    const Mat3& rot = tool.geometry.rotation;
    Vec3T<Ad> rel, local;
    for (int k = 0; k < 3; ++k) {
      rel[k] = Ad(x[c.index][k], 7, k) - Ad(r.pose.position[k], 7, 3 + k);
    }
    for (int k = 0; k < 3; ++k) {
      local[k] = Ad(rot(0, k) * rel[0] + rot(1, k) * rel[1] + rot(2, k) * rel[2]);
    }
    const Ad gap(r.pose.opening, 7, 6);
    const Ad d = tool.geometry.local<Ad>(local, gap).distance;
    const auto& g = d.derivatives();
    fin.x[c.index] += w.sdf * g.head<3>();
    fin.q = w.sdf * g.segment<3>(3);
    fin.gap = w.sdf * g[6];
  }
  return fin;
}

template <int D>
ActionGradient adjoint_gradient(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                                const ActionSequence& actions, const PointCloud& candidate,
                                const SimConfig& cfg, const LossWeights& w) {
  ActionGradient out;
  out.grad = mpm::adjoint_impl<D>(
      s0, tool, pose0, actions, cfg,
      [&](const RolloutResult& r) { return terminal_adjoint(r, candidate, tool, w); },
      out.rollout);
  return out;
}

}  // namespace

ActionGradient grad_actions(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                            const ActionSequence& actions, const PointCloud& candidate,
                            const SimConfig& cfg, const LossWeights& w) {
  if (candidate.size() != s0.size()) throw DomainError("candidate size differs from state");
  auto loss_of = [&](const RolloutResult& r, const ActionSequence& a) {
    return composite_loss(r.state.positions(), candidate, tool, r.pose, a, w);
  };
  ActionGradient out;
  if (cfg.gradient == GradientMode::kAdjoint) {
    out = cfg.dim == 2 ? adjoint_gradient<2>(s0, tool, pose0, actions, candidate, cfg, w)
                       : adjoint_gradient<3>(s0, tool, pose0, actions, candidate, cfg, w);
    out.grad += (2.0 * w.velocity / actions.steps()) * actions.values;
  } else {
    out.rollout = rollout(s0, tool, pose0, actions, cfg);
    out.grad = Eigen::MatrixXd::Zero(actions.steps(), actions.dof());
    const double h = cfg.fd_step;
    for (int t = 0; t < actions.steps(); ++t) {
      for (int k = 0; k < actions.dof(); ++k) {
        if (cfg.dim == 2 && k == 2) continue;
        ActionSequence plus = actions, minus = actions;
        plus.values(t, k) += h;
        minus.values(t, k) -= h;
        const auto rp = cfg.dim == 2 ? mpm::rollout_impl<2>(s0, tool, pose0, plus, cfg, false)
                                     : mpm::rollout_impl<3>(s0, tool, pose0, plus, cfg, false);
        const auto rm = cfg.dim == 2 ? mpm::rollout_impl<2>(s0, tool, pose0, minus, cfg, false)
                                     : mpm::rollout_impl<3>(s0, tool, pose0, minus, cfg, false);
        out.grad(t, k) = (loss_of(rp, plus) - loss_of(rm, minus)) / (2.0 * h);
      }
    }
  }
  out.loss = loss_of(out.rollout, actions);
  return out;
}

}  // namespace dough
