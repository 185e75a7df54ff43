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

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dough/geometry/point_cloud.hpp"
#include "dough/physics/loss.hpp"
#include "dough/transport/emd_step.hpp"

namespace dough {

struct PlannerConfig {
  int max_steps = 200;  // simulation (action) steps
  int K = 20;           // emd steps per candidate
  int L = 40;           // horizon
  int J = 50;           // Adam iterations per horizon
  double learning_rate = 0.02;
  double alpha = 0.1;  // emd step fraction, see EmdStepParams
  /// Stop once emd < tau_fraction * initial emd (never below tau_floor).
  double tau_fraction = 0.05;
  double tau_floor = 1e-12;
  /// delta = delta_fraction * diagonal of the dough AABB.
  double delta_fraction = 0.05;
  int placement_grid = 9;  // candidates per horizontal axis
  /// Sinkhorn blur relative to the diagonal of the initial and target clouds.
  double blur_fraction = 0.02;
  int sinkhorn_max_iters = 500;
  double sinkhorn_tolerance = 1e-6;
  SimConfig sim;
  LossWeights weights;

  EmdStepParams emd_params() const { return {alpha, K}; }
  /// Throws ConfigError.
  void validate() const;
};

/// A scored tool placement from the candidate grid.
struct Placement {
  ToolPose pose;
  int index = -1;  // position in the candidate list
  double objective = 0.0;
};

/// Candidate poses: a placement_grid^2 horizontal grid over the dough AABB
/// (a single row along x in 2-D) on one vertical layer. Pressing tools hover
/// half their height plus one cell above the dough; the gripper stands on
/// the dough's base with its plates opened one cell wider than the dough.
std::vector<ToolPose> placement_candidates(const PointCloud& pc, const ToolSpec& tool,
                                           const PlannerConfig& cfg);

/// argmax over `candidates` of sum_i |field_i|_1 / (max(sdf_x(p_i), 0) + delta).
/// Candidates with a particle inside the tool, or listed in `exclude`, are
/// skipped; ties keep the lowest index. Throws ConfigError when nothing is
/// admissible.
Placement select_placement(const PointCloud& pc, const DeformationField& field,
                           const ToolSpec& tool, const std::vector<ToolPose>& candidates,
                           double delta, const std::vector<int>& exclude = {});

/// Grid search over placement_candidates with delta from the config.
Placement select_initial_position(const PointCloud& pc, const DeformationField& field,
                                  const ToolSpec& tool, const PlannerConfig& cfg,
                                  const std::vector<int>& exclude = {});

struct OptimizedActions {
  ActionSequence actions;
  double loss = 0.0;       // composite loss of `actions`
  double zero_loss = 0.0;  // composite loss of the all-zero start
  int iterations = 0;
};

/// J projected Adam steps on composite_loss from zero actions; returns the
/// best iterate seen. SimulationDiverged from the zero start propagates;
/// later divergence ends the search early.
OptimizedActions optimize_actions(const SimState& s, const PointCloud& candidate,
                                  const ToolSpec& tool, const ToolPose& pose,
                                  const PlannerConfig& cfg, int horizon = 0);

/// One pass through the planning loop.
struct PlanIteration {
  PlanIteration(int t0, PointCloud c) : t(t0), candidate(std::move(c)) {}

  int t = 0;  // committed steps before this iteration
  PointCloud candidate;
  bool reset = false;
  std::optional<Placement> placement;
  ToolPose start_pose;
  ActionSequence actions;
  double emd_last = 0.0;  // +inf before the first acceptance
  double emd_curr = 0.0;
  bool accepted = false;
  /// accepted | threshold | no_progress | diverged
  std::string outcome;
};

struct PlanTrace {
  std::vector<PlanIteration> iterations;
  double initial_emd = 0.0;
  double tau = 0.0;
  double final_emd = 0.0;
  int executed_steps = 0;
  int resets = 0;
  bool complete = false;     // stopped below tau
  bool interrupted = false;  // cancelled from outside
  /// Why planning stopped: threshold | budget | placements_exhausted |
  /// interrupted.
  std::string stop_reason;
  SimState final_state;
  ToolPose final_pose;
  std::vector<PointCloud> trajectory;  // committed per-step clouds
};

struct PlannerHooks {
  /// Called after each iteration and once at the end.
  std::function<void(const PlanTrace&)> on_update;
  const std::atomic<bool>* cancel = nullptr;
};

/// Closed-loop planning toward `target` with one tool. Each iteration steps
/// the particles toward the target in divergence space, (re)places the tool
/// when needed, optimizes a horizon of actions against the candidate and
/// executes it. A horizon that raises the divergence is rolled back and the
/// tool is placed elsewhere; placements that failed from the same state are
/// not retried. Runs out of placements or steps -> incomplete trace.
/// With `initial_pose` the tool starts there instead of at a searched
/// placement.
PlanTrace mpc_run(const SimState& s0, const PointCloud& target, const ToolSpec& tool,
                  const PlannerConfig& cfg,
                  const std::optional<ToolPose>& initial_pose = std::nullopt,
                  const PlannerHooks& hooks = {});

/// Sinkhorn settings used for every divergence of one planning run.
SinkhornParams planner_sinkhorn(const PointCloud& start, const PointCloud& target,
                                const PlannerConfig& cfg);

nlohmann::json to_json(const PlanTrace& trace, bool include_clouds = true);

}  // namespace dough
