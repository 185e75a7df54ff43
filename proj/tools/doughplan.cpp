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


#include <atomic>
#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dough/cli/commands.hpp"
#include "dough/errors.hpp"

namespace {

std::atomic<bool> g_cancel{false};

extern "C" void on_signal(int) { g_cancel.store(true); }

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> config;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.set, "override a config key, e.g. planner.K=20")
      ->allow_extra_args(false);
}

dough::RunConfig resolve(const Common& c) {
  std::vector<std::string> overrides = c.set;
  // Flags win over both the file and --set.
  if (c.seed) overrides.push_back("seed=" + std::to_string(*c.seed));
  std::optional<std::filesystem::path> file;
  if (c.config) file = *c.config;
  dough::RunConfig cfg = dough::load_run_config(file, overrides);
  if (c.out) cfg.out = *c.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"doughplan: dough manipulation planning"};
  app.require_subcommand(1);

  Common plan_c, run_c, bench_c, grad_c;
  dough::PlanOptions plan_o;
  dough::RunOptions run_o;
  dough::BenchOptions bench_o;
  dough::GradcheckCommandOptions grad_o;

  auto* plan = app.add_subcommand("plan", "ask for a multi-stage plan and validate it");
  add_common(plan, plan_c);
  plan->add_option("task", plan_o.task, "task or fixture name")->required();
  auto* live = plan->add_flag("--live", plan_o.live, "query the LLM endpoint");
  plan->add_flag("--fixture", "read the shipped fixture (default)")->excludes(live);

  auto* run = app.add_subcommand("run", "plan and execute one task");
  add_common(run, run_c);
  run->add_option("task", run_o.task, "task name")->required();
  bool no_traj = false;
  run->add_flag("--no-trajectory", no_traj, "skip per-step PLY dumps");

  auto* bench = app.add_subcommand("bench", "run the benchmark suite");
  add_common(bench, bench_c);
  bench->add_option("--suite", bench_o.suite, "single | multi | all | task,task,...");

  auto* grad = app.add_subcommand("gradcheck", "compare analytic and numeric gradients");
  add_common(grad, grad_c);
  grad->add_option("--module", grad_o.module, "transport | physics | all")
      ->check(CLI::IsMember({"transport", "physics", "all"}));
  grad->add_option("--instances", grad_o.instances, "instances per module (0 = default)")
      ->check(CLI::NonNegativeNumber);
  grad->add_option("--break-component", grad_o.break_component,
                   "corrupt this gradient component (self-test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Error& e) {
    app.exit(e);
    return dough::kExitConfig;
  }
  run_o.trajectory = !no_traj;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  dough::CommandIo io{std::cout, std::cerr, &g_cancel};

  return dough::run_guarded(
      [&]() -> int {
        if (plan->parsed()) return dough::cmd_plan(resolve(plan_c), plan_o, io);
        if (run->parsed()) return dough::cmd_run(resolve(run_c), run_o, io);
        if (bench->parsed()) return dough::cmd_bench(resolve(bench_c), bench_o, io);
        return dough::cmd_gradcheck(resolve(grad_c), grad_o, io);
      },
      std::cerr);
}
