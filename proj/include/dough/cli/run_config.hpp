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
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dough/eval/benchmark.hpp"
#include "dough/hlp/hlp.hpp"

namespace dough {

/// Bench defaults with the fixture directory shipped next to the sources.
BenchConfig default_bench_config();

/// Everything a command needs. Loaded from a JSON file shaped like
/// to_json(RunConfig{}) (every key optional) plus "a.b=value" overrides.
///
///   seed, out
///   planner: max_steps K L J learning_rate alpha tau_fraction tau_floor
///            delta_fraction placement_grid blur_fraction sinkhorn_max_iters
///            sinkhorn_tolerance
///   loss:    p2p sdf velocity
///   sim:     dim grid_res domain dt substeps gravity ground_friction
///            boundary_cells contact_layer_cells max_speed fd_step
///            gradient ("adjoint" | "finite_difference")
///            material: youngs_modulus poisson_ratio yield_stress density
///   bench:   particles fixture_dir trials (0 keeps each task's count)
///   plan:    points
///   llm:     endpoint model api_key_env timeout_s max_retries
///            retry_backoff_s temperature
///   tasks:   list of task objects (name description initial target tool
///            fixture threshold trials target_shift target_seed_offset);
///            a name already in the catalog replaces that entry
///
/// Unknown keys are rejected. Relative paths in the file are taken relative
/// to the file's directory.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  BenchConfig bench = default_bench_config();
  int bench_trials = 0;
  std::size_t plan_points = 2000;
  LlmClientConfig llm;
  std::vector<TaskSpec> tasks = task_catalog();

  /// Throws ConfigError.
  void validate() const;
  /// Throws ConfigError for unknown names.
  TaskSpec task(const std::string& name) const;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Throws ConfigError.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Defaults, then the file (if any), then each "dotted.key=value" override.
/// Override values are parsed as JSON when possible, else taken as text.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides = {});

nlohmann::json to_json(const TaskSpec& task);
TaskSpec task_from_json(const nlohmann::json& j);

}  // namespace dough
