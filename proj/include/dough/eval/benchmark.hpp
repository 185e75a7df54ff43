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
#include <cstdint>
#include <functional>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dough/geometry/shape_program.hpp"
#include "dough/planner/planner.hpp"
#include "dough/transport/sinkhorn.hpp"

namespace dough {

/// (S(p0, p*) - S(pT, p*)) / S(p0, p*). Negative when the dough moved away
/// from the target. Throws DomainError when S(p0, p*) <= 1e-12 * D^2, D the
/// diagonal of the AABB of p0 and p*.
double normalized_score(const PointCloud& p0, const PointCloud& pT, const PointCloud& pstar,
                        const SinkhornParams& sp);

/// A benchmark task. Shapes are in the table frame: the table top is y = 0
/// and the dough starts centred over the origin.
struct TaskSpec {
  std::string name;
  std::string description;  // task text handed to the language model
  ShapeProgram initial = Sphere{};
  /// Single-tool tasks: explicit target and its tool.
  std::optional<ShapeProgram> target;
  std::string tool;
  /// Multi-tool tasks: plan fixture (<fixture_dir>/<fixture>.json).
  std::string fixture;
  double threshold = 0.5;
  int trials = 5;
  /// Trial with seed s shifts the target along x by
  /// target_shift * ((s % 5) - 2) / 2.
  double target_shift = 0.0;
  /// Target clouds are sampled with seed + target_seed_offset.
  std::uint64_t target_seed_offset = 1000;

  bool multi_tool() const { return !target.has_value(); }
  /// Throws ConfigError.
  void validate() const;
};

/// spread, cut, arrange, donut, baguette, two_pancakes.
std::vector<TaskSpec> task_catalog();
/// Throws ConfigError for an unknown name.
TaskSpec find_task(const std::string& name);

/// score >= threshold.
bool success(double score, const TaskSpec& task);

struct BenchConfig {
  PlannerConfig planner;
  std::size_t particles = 150;
  std::filesystem::path fixture_dir = "fixtures";
};

/// Offset from the table frame to the simulator frame.
Vec3 table_to_sim(const SimConfig& sim);

struct TrialResult {
  std::string task;
  std::uint64_t seed = 0;
  double score = 0.0;  // 0 for failed and degenerate trials
  bool success = false;
  /// Target and start coincide, so no score is defined.
  bool degenerate = false;
  double initial_emd = 0.0;
  double final_emd = 0.0;
  int executed_steps = 0;
  int resets = 0;
  int stages = 0;
  std::string stop_reason;
  /// Accepted-iteration divergences strictly decrease in every stage.
  bool monotone = true;
  double seconds = 0.0;
  std::string error;  // empty when the trial ran
};

/// Everything one trial produced, for callers that write artifacts.
struct TrialRun {
  explicit TrialRun(PointCloud p0) : initial(std::move(p0)) {}

  TrialResult result;
  PointCloud initial;
  std::vector<PointCloud> subgoals;  // last one is the scored target
  std::vector<std::string> stage_tools;
  std::vector<PlanTrace> traces;
};

/// Subgoals, stage tools and initial cloud of one trial, in the simulator
/// frame. Throws for unresolvable tasks.
TrialRun prepare_trial(const TaskSpec& task, const BenchConfig& cfg, std::uint64_t seed);

/// Runs every stage in order, each from the previous stage's final state.
/// Planning failures (SimulationDiverged and friends) are recorded in
/// result.error with score 0; configuration problems throw.
TrialRun run_trial(const TaskSpec& task, const BenchConfig& cfg, std::uint64_t seed,
                   const PlannerHooks& hooks = {});

struct ScoreReport {
  std::string task;
  double threshold = 0.0;
  std::vector<TrialResult> trials;
  double mean_score = 0.0;
  double success_rate = 0.0;
  double seconds = 0.0;
};

/// Pure function of the rows.
ScoreReport aggregate(const std::string& task, double threshold,
                      const std::vector<TrialResult>& trials);

struct BenchHooks {
  std::function<void(const TrialResult&)> on_trial;
  /// Checked inside planning and between trials; a cancelled benchmark
  /// returns the rows finished so far.
  const std::atomic<bool>* cancel = nullptr;
};

/// Trials of every task use seeds base_seed .. base_seed + trials - 1
/// unless `seeds` is given.
std::vector<ScoreReport> run_benchmark(const std::vector<TaskSpec>& tasks, const BenchConfig& cfg,
                                       std::uint64_t base_seed,
                                       const std::vector<std::uint64_t>& seeds = {},
                                       const BenchHooks& hooks = {});

nlohmann::json to_json(const TrialResult& r);
nlohmann::json to_json(const std::vector<ScoreReport>& reports);
/// A lump to be flattened in place, with the rolling pin resting on the
/// table right beside it. Pushing from there only shoves the lump sideways,
/// so planning from this pose has to reset the tool to make progress.
struct LocalMinimumScenario {
  SimState s0;
  PointCloud target;
  ToolSpec tool;
  ToolPose pose;
};
LocalMinimumScenario make_local_minimum_scenario(const SimConfig& sim, std::size_t particles,
                                                 std::uint64_t seed);

struct ResetSummary {
  int first_reset = -1;  // iteration index, -1 when the tool never reset
  double best_before = 0.0;  // min of the initial and accepted emd before it
  double best_after = 0.0;   // min accepted emd from the reset on
};
ResetSummary summarize_resets(const PlanTrace& trace);

/// "0.680/100%" cells, one column per task.
std::string format_table(const std::vector<ScoreReport>& reports,
                         const std::string& method = "ours");

}  // namespace dough
