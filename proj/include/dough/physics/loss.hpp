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
#include "dough/physics/sim.hpp"

namespace dough {

/// Sum over points of the L1 distance between index-aligned clouds.
/// Throws DomainError on size mismatch.
double loss_p2p(const PointCloud& current, const PointCloud& candidate);

/// max(min_i sdf(p_i), 0): zero once the tool touches the dough, otherwise
/// the gap between tool and closest particle.
double sdf_proximity(const ToolSpec& tool, const ToolPose& pose, const PointCloud& cloud);

/// Mean over steps of the squared action norm.
double velocity_regularization(const ActionSequence& actions);

struct LossWeights {
  double p2p = 1.0;
  double sdf = 1.0;
  double velocity = 0.02;
};

/// Weighted sum of the three terms above, evaluated on the final particles
/// and the final tool pose.
double composite_loss(const PointCloud& current, const PointCloud& candidate,
                      const ToolSpec& tool, const ToolPose& pose,
                      const ActionSequence& actions, const LossWeights& w = {});

struct ActionGradient {
  double loss = 0.0;  // composite loss of the unperturbed rollout
  Eigen::MatrixXd grad;  // same shape as the actions
  RolloutResult rollout;
};

/// Gradient of composite_loss(rollout(s0, ...).state, candidate, ...) with
/// respect to every action component, by the adjoint of the simulator or
/// by central differences depending on cfg.gradient.
ActionGradient grad_actions(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                            const ActionSequence& actions, const PointCloud& candidate,
                            const SimConfig& cfg, const LossWeights& w = {});

}  // namespace dough
