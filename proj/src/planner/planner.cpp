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


#include "dough/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dough/errors.hpp"
#include "dough/transport/sinkhorn.hpp"

namespace dough {

void PlannerConfig::validate() const {
  if (max_steps < 1 || K < 1 || L < 1 || J < 1 || placement_grid < 1) {
    throw ConfigError("planner counts must be >= 1");
  }
  if (!(learning_rate > 0.0) || !(alpha > 0.0)) {
    throw ConfigError("learning rate and alpha must be positive");
  }
  if (!(tau_fraction > 0.0) || !(tau_floor > 0.0) || !(delta_fraction > 0.0)) {
    throw ConfigError("tau and delta must be positive");
  }
  if (!(blur_fraction > 0.0) || sinkhorn_max_iters < 1 || !(sinkhorn_tolerance > 0.0)) {
    throw ConfigError("invalid sinkhorn settings");
  }
  sim.validate();
}

SinkhornParams planner_sinkhorn(const PointCloud& start, const PointCloud& target,
                                const PlannerConfig& cfg) {
  SinkhornParams sp = SinkhornParams::for_clouds(start, target, cfg.blur_fraction);
  sp.max_iters = cfg.sinkhorn_max_iters;
  sp.tolerance = cfg.sinkhorn_tolerance;
  return sp;
}

std::vector<ToolPose> placement_candidates(const PointCloud& pc, const ToolSpec& tool,
                                           const PlannerConfig& cfg) {
  const Aabb box = aabb(pc);
  const int n = cfg.placement_grid;
  const double cell = cfg.sim.dx();
  ToolPose base;
  double y = box.max.y() + tool.geometry.half_height() + cell;
  if (tool.kind == ToolKind::kGripper) {
    y = box.min.y() + tool.geometry.half_height() + cell;
    base.opening = box.extent().x() + 2.0 * cell;
  }
  auto along = [n](double lo, double hi, int i) {
    return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
  };
  std::vector<ToolPose> out;
  const int nz = cfg.sim.dim == 2 ? 1 : n;
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < n; ++ix) {
      ToolPose p = base;
      const double z = cfg.sim.dim == 2 ? 0.0 : along(box.min.z(), box.max.z(), iz);
      p.position = Vec3(along(box.min.x(), box.max.x(), ix), y, z);
      out.push_back(p);
    }
  }
  return out;
}

Placement select_placement(const PointCloud& pc, const DeformationField& field,
                           const ToolSpec& tool, const std::vector<ToolPose>& candidates,
                           double delta, const std::vector<int>& exclude) {
  if (field.size() != pc.size()) throw DomainError("deformation field size differs from cloud");
  if (candidates.empty()) throw ConfigError("empty placement grid");
  if (!(delta > 0.0)) throw ConfigError("placement delta must be positive");
  Placement best;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (std::find(exclude.begin(), exclude.end(), static_cast<int>(c)) != exclude.end()) continue;
    double value = 0.0;
    bool feasible = true;
    for (std::size_t i = 0; i < pc.size() && feasible; ++i) {
      const double d = tool_distance(tool, candidates[c], pc[i]);
      if (d < 0.0) feasible = false;
      value += field.displacement[i].lpNorm<1>() / (d + delta);
    }
    if (!feasible) continue;
    if (value > best_value) {
      best_value = value;
      best = {candidates[c], static_cast<int>(c), value};
    }
  }
  if (best.index < 0) throw ConfigError("no admissible tool placement");
  return best;
}

Placement select_initial_position(const PointCloud& pc, const DeformationField& field,
                                  const ToolSpec& tool, const PlannerConfig& cfg,
                                  const std::vector<int>& exclude) {
  const double delta = cfg.delta_fraction * aabb(pc).diagonal();
  return select_placement(pc, field, tool, placement_candidates(pc, tool, cfg), delta, exclude);
}

OptimizedActions optimize_actions(const SimState& s, const PointCloud& candidate,
                                  const ToolSpec& tool, const ToolPose& pose,
                                  const PlannerConfig& cfg, int horizon) {
  const int steps = horizon > 0 ? horizon : cfg.L;
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  ActionSequence a(steps, tool.dof());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(steps, tool.dof());
  Eigen::MatrixXd v = m;
  OptimizedActions best;
  best.actions = a;
  best.loss = std::numeric_limits<double>::infinity();
  for (int j = 0; j < cfg.J; ++j) {
    ActionGradient g;
    try {
      g = grad_actions(s, tool, pose, a, candidate, cfg.sim, cfg.weights);
    } catch (const SimulationDiverged&) {
      if (j == 0) throw;
      break;
    }
    if (j == 0) best.zero_loss = g.loss;
    if (g.loss < best.loss) {
      best.loss = g.loss;
      best.actions = a;
    }
    best.iterations = j + 1;
    m = b1 * m + (1.0 - b1) * g.grad;
    v = b2 * v + (1.0 - b2) * g.grad.cwiseProduct(g.grad);
    const double c1 = 1.0 - std::pow(b1, j + 1), c2 = 1.0 - std::pow(b2, j + 1);
    a.values -= cfg.learning_rate *
                ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    a.project(tool, cfg.sim.max_speed);
  }
  return best;
}

PlanTrace mpc_run(const SimState& s0, const PointCloud& target, const ToolSpec& tool,
                  const PlannerConfig& cfg, const std::optional<ToolPose>& initial_pose,
                  const PlannerHooks& hooks) {
  cfg.validate();
  tool.validate();
  if (target.size() == 0) throw DomainError("empty target");
  const SinkhornParams sp = planner_sinkhorn(s0.positions(), target, cfg);
  const EmdStepParams ep = cfg.emd_params();
  constexpr double inf = std::numeric_limits<double>::infinity();

  PlanTrace trace;
  trace.final_state = s0;
  trace.final_pose = initial_pose.value_or(ToolPose{});
  trace.initial_emd = sinkhorn_divergence(s0.positions(), target, sp);
  trace.final_emd = trace.initial_emd;
  trace.tau = std::max(cfg.tau_fraction * trace.initial_emd, cfg.tau_floor);
  auto notify = [&] {
    if (hooks.on_update) hooks.on_update(trace);
  };
  if (trace.initial_emd < trace.tau) {
    trace.complete = true;
    trace.stop_reason = "threshold";
    notify();
    return trace;
  }

  SimState& state = trace.final_state;
  ToolPose& pose = trace.final_pose;
  int t = 0;
  bool need_reset = !initial_pose.has_value();
  double emd_last = inf;
  std::vector<int> tabu;  // placements that failed from the current state
  trace.stop_reason = "budget";

  while (t < cfg.max_steps) {
    if (hooks.cancel != nullptr && hooks.cancel->load()) {
      trace.interrupted = true;
      trace.stop_reason = "interrupted";
      break;
    }
    const PointCloud current = state.positions();
    PlanIteration it{t, emd_step(current, target, sp, ep)};
    it.emd_last = emd_last;
    if (need_reset) {
      try {
        it.placement = select_initial_position(
            current, DeformationField::between(current, it.candidate), tool, cfg, tabu);
      } catch (const ConfigError&) {
        trace.stop_reason = "placements_exhausted";
        break;
      }
      it.reset = true;
      ++trace.resets;
      pose = it.placement->pose;
      need_reset = false;
    }
    it.start_pose = pose;
    const int horizon = std::min(cfg.L, cfg.max_steps - t);

    RolloutResult executed;
    try {
      it.actions = optimize_actions(state, it.candidate, tool, pose, cfg, horizon).actions;
      executed = rollout(state, tool, pose, it.actions, cfg.sim);
      it.emd_curr = sinkhorn_divergence(executed.state.positions(), target, sp);
    } catch (const SimulationDiverged&) {
      it.outcome = "diverged";
      it.emd_curr = inf;
    }

    if (it.outcome == "diverged" || it.emd_curr > emd_last) {
      if (it.outcome.empty()) it.outcome = "no_progress";
      if (it.placement) tabu.push_back(it.placement->index);
      need_reset = true;
      trace.iterations.push_back(std::move(it));
      notify();
      continue;
    }
    // Commit the executed horizon.
    state = std::move(executed.state);
    pose = executed.pose;
    trace.trajectory.insert(trace.trajectory.end(), executed.trajectory.begin(),
                            executed.trajectory.end());
    trace.executed_steps += horizon;
    trace.final_emd = it.emd_curr;
    tabu.clear();
    if (it.emd_curr < trace.tau) {
      it.outcome = "threshold";
      trace.complete = true;
      trace.stop_reason = "threshold";
      trace.iterations.push_back(std::move(it));
      break;
    }
    it.outcome = "accepted";
    it.accepted = true;
    t += horizon;
    emd_last = it.emd_curr;
    trace.iterations.push_back(std::move(it));
    notify();
  }
  notify();
  return trace;
}

namespace {

nlohmann::json cloud_json(const PointCloud& pc) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pc) arr.push_back({p.x(), p.y(), p.z()});
  return arr;
}

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

nlohmann::json pose_json(const ToolPose& p) {
  return {{"position", vec_json(p.position)}, {"angle", p.angle}, {"opening", p.opening}};
}

// JSON has no infinity.
nlohmann::json finite_or_null(double x) {
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const PlanTrace& trace, bool include_clouds) {
  nlohmann::json doc;
  doc["initial_emd"] = trace.initial_emd;
  doc["tau"] = trace.tau;
  doc["final_emd"] = trace.final_emd;
  doc["executed_steps"] = trace.executed_steps;
  doc["resets"] = trace.resets;
  doc["complete"] = trace.complete;
  doc["interrupted"] = trace.interrupted;
  doc["stop_reason"] = trace.stop_reason;
  doc["final_pose"] = pose_json(trace.final_pose);
  auto its = nlohmann::json::array();
  for (const auto& it : trace.iterations) {
    nlohmann::json j;
    j["t"] = it.t;
    j["reset"] = it.reset;
    if (it.placement) {
      j["placement"] = pose_json(it.placement->pose);
      j["placement_index"] = it.placement->index;
      j["placement_objective"] = it.placement->objective;
    }
    j["start_pose"] = pose_json(it.start_pose);
    auto rows = nlohmann::json::array();
    for (int r = 0; r < it.actions.steps(); ++r) {
      auto row = nlohmann::json::array();
      for (int k = 0; k < it.actions.dof(); ++k) row.push_back(it.actions.values(r, k));
      rows.push_back(row);
    }
    j["actions"] = rows;
    j["emd_last"] = finite_or_null(it.emd_last);
    j["emd_curr"] = finite_or_null(it.emd_curr);
    j["accepted"] = it.accepted;
    j["outcome"] = it.outcome;
    if (include_clouds) j["candidate"] = cloud_json(it.candidate);
    its.push_back(std::move(j));
  }
  doc["iterations"] = std::move(its);
  if (include_clouds) doc["final_cloud"] = cloud_json(trace.final_state.positions());
  return doc;
}

}  // namespace dough
