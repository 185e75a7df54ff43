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
#include <string>
#include <vector>

#include "dough/physics/loss.hpp"
#include "dough/transport/sinkhorn.hpp"

namespace dough {

/// One analytic-versus-central-difference comparison.
struct GradcheckCase {
  std::uint64_t seed = 0;
  double relative_error = 0.0;
  /// Flattened index of the largest absolute disagreement.
  int worst_component = -1;
  bool pass = false;
};

struct GradcheckReport {
  std::string module;
  double tolerance = 0.0;
  int required = 0;  // passing cases needed
  std::vector<GradcheckCase> cases;
  double seconds = 0.0;

  int passed() const;
  bool pass() const { return passed() >= required; }
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int instances = 0;  // 0 picks the module default (20 transport, 10 physics)
  /// Test hook: when >= 0, the analytic gradient is corrupted at this
  /// flattened component before comparison.
  int break_component = -1;
};

/// emd_gradient against central differences of sinkhorn_divergence
/// (h = 1e-4 * diagonal) on random 8-point clouds in the unit cube.
/// Error is max |analytic - fd| / max |fd|; every instance must stay
/// within 1e-3. epsilon = (blur_fraction * D)^2.
GradcheckReport transport_gradcheck(const GradcheckOptions& opt,
                                    double blur_fraction = 0.02);

/// Small 2-D pressing scene used to exercise grad_actions: a slab of dough
/// on the ground, a rolling pin just above it and random actions.
struct PhysicsToy {
  SimState s0;
  ToolSpec tool;
  ToolPose pose;
  ActionSequence actions;
  PointCloud candidate;
};

PhysicsToy make_physics_toy(std::uint64_t seed, const SimConfig& cfg,
                            std::size_t particles = 150, int horizon = 5);

/// grad_actions (adjoint) against central differences with h = cfg.fd_step
/// on the toy. Error is |analytic - fd| / |fd| in the Frobenius norm;
/// 9 of 10 seeds must stay within 5%.
GradcheckReport physics_gradcheck(const GradcheckOptions& opt, const SimConfig& cfg = {});

}  // namespace dough
