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
#include <iosfwd>
#include <string>

#include "dough/cli/run_config.hpp"

namespace dough {

enum ExitCode : int {
  kExitOk = 0,
  kExitRuntime = 1,
  kExitRejected = 2,
  kExitConfig = 3,
};

struct CommandIo {
  std::ostream& out;
  std::ostream& err;
  const std::atomic<bool>* cancel = nullptr;
};

/// Every command writes the effective config to <out>/config.json first.

struct PlanOptions {
  std::string task;   // catalog task or fixture name
  bool live = false;  // query the LLM endpoint instead of the fixture
};

/// Writes prompt.txt, raw_response.txt, plan.json, validation.json and
/// stage_<k>.ply (table frame). Rejected plans exit 2.
int cmd_plan(const RunConfig& cfg, const PlanOptions& opt, CommandIo& io);

struct RunOptions {
  std::string task;
  bool trajectory = true;  // dump per-step clouds under trajectory/
};

/// One trial with the config seed. Writes trace.json (refreshed after each
/// planning iteration), initial.ply, subgoal_<k>.ply and final.ply.
int cmd_run(const RunConfig& cfg, const RunOptions& opt, CommandIo& io);

struct BenchOptions {
  /// single | multi | all | comma separated task names
  std::string suite = "single";
};

/// Writes report.json and report.txt and prints the table.
int cmd_bench(const RunConfig& cfg, const BenchOptions& opt, CommandIo& io);

struct GradcheckCommandOptions {
  std::string module = "all";  // transport | physics | all
  int instances = 0;
  int break_component = -1;
};

/// Writes gradcheck.json; exits 1 if any module fails.
int cmd_gradcheck(const RunConfig& cfg, const GradcheckCommandOptions& opt, CommandIo& io);

/// Runs `body`, mapping exceptions to exit codes: ConfigError 3,
/// PlanParseError 2, anything else 1.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace dough
