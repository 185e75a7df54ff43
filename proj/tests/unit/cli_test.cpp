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


#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dough/cli/commands.hpp"
#include "dough/errors.hpp"

namespace dough {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dough_cli_" + name + "_" +
                                                  std::to_string(std::random_device{}()));
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

RunConfig tiny(const fs::path& out) {
  RunConfig cfg = load_run_config(std::nullopt, {"planner.max_steps=4", "planner.L=2",
                                                 "planner.J=1", "planner.K=2",
                                                 "bench.particles=40"});
  cfg.out = out;
  return cfg;
}

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig a;
  const RunConfig b = run_config_from_json(to_json(a));
  EXPECT_EQ(to_json(a), to_json(b));
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.llm.api_key_env, "DOUGH_LLM_API_KEY");
}

TEST(RunConfig, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(load_run_config(std::nullopt, {"planner.bogus=1"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"planner.K=\"many\""}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"noequals"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"planner.K=0"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"sim.gradient=\"symbolic\""}), ConfigError);
  const auto dir = scratch("bad");
  write(dir / "c.json", "{ \"planner\": { \"alpah\": 0.1 } }");
  EXPECT_THROW(load_run_config(dir / "c.json"), ConfigError);
  write(dir / "d.json", "{ not json");
  EXPECT_THROW(load_run_config(dir / "d.json"), ConfigError);
  EXPECT_THROW(load_run_config(dir / "missing.json"), ConfigError);
}

TEST(RunConfig, FileThenOverrides) {
  const auto dir = scratch("file");
  fs::copy(DOUGH_FIXTURE_DIR, dir / "fx");
  write(dir / "c.json", R"(// comment allowed
{ "seed": 7, "out": "results", "planner": { "K": 30, "alpha": 0.05 },
  "bench": { "fixture_dir": "fx", "trials": 3 }, "llm": { "model": "m1" } })");
  const RunConfig cfg =
      load_run_config(dir / "c.json", {"planner.K=12", "llm.model=other-model", "seed=9"});
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.bench.planner.K, 12);
  EXPECT_DOUBLE_EQ(cfg.bench.planner.alpha, 0.05);
  EXPECT_EQ(cfg.bench_trials, 3);
  EXPECT_EQ(cfg.llm.model, "other-model");
  EXPECT_EQ(cfg.out, (dir / "results").lexically_normal());
  EXPECT_EQ(fs::path(cfg.bench.fixture_dir), (dir / "fx").lexically_normal());
  // Untouched keys keep their defaults.
  EXPECT_EQ(cfg.bench.planner.L, RunConfig{}.bench.planner.L);
}

TEST(RunConfig, ReferencedFilesMustExist) {
  EXPECT_THROW(load_run_config(std::nullopt, {"bench.fixture_dir=\"/nonexistent/fx\""}),
               ConfigError);
  RunConfig cfg;
  TaskSpec t = cfg.task("donut");
  t.name = "ghost";
  t.fixture = "no_such_plan";
  cfg.tasks.push_back(t);
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RunConfig, TasksReplaceByName) {
  TaskSpec t = RunConfig{}.task("spread");
  t.threshold = 0.9;
  TaskSpec extra = t;
  extra.name = "spread_wide";
  nlohmann::json doc = {{"tasks", {to_json(t), to_json(extra)}}};
  const RunConfig cfg = run_config_from_json(doc);
  EXPECT_DOUBLE_EQ(cfg.task("spread").threshold, 0.9);
  EXPECT_DOUBLE_EQ(cfg.task("spread_wide").threshold, 0.9);
  EXPECT_EQ(cfg.tasks.size(), task_catalog().size() + 1);
  EXPECT_THROW(cfg.task("nope"), ConfigError);
  EXPECT_EQ(to_json(task_from_json(to_json(extra))), to_json(extra));
}

TEST(Commands, GuardedExitCodes) {
  std::ostringstream err;
  EXPECT_EQ(run_guarded([] { return 0; }, err), kExitOk);
  EXPECT_EQ(run_guarded([]() -> int { throw ConfigError("x"); }, err), kExitConfig);
  EXPECT_EQ(run_guarded([]() -> int { throw PlanParseError("x", 1); }, err), kExitRejected);
  EXPECT_EQ(run_guarded([]() -> int { throw SimulationDiverged("x", 3); }, err), kExitRuntime);
  EXPECT_EQ(run_guarded([]() -> int { throw std::runtime_error("x"); }, err), kExitRuntime);
}

TEST(Commands, PlanVerdictsAndFiles) {
  const auto dir = scratch("plan");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg;
  cfg.plan_points = 300;

  cfg.out = dir / "ok";
  EXPECT_EQ(cmd_plan(cfg, {"two_pancakes", false}, io), kExitOk);
  for (const char* f : {"config.json", "prompt.txt", "raw_response.txt", "plan.json",
                        "validation.json", "stage_0.ply", "stage_1.ply"}) {
    EXPECT_TRUE(fs::exists(cfg.out / f)) << f;
  }
  EXPECT_EQ(read_json(cfg.out / "validation.json")["verdict"], "pass");

  cfg.out = dir / "bad";
  EXPECT_EQ(cmd_plan(cfg, {"donut_corrupted", false}, io), kExitRejected);
  const auto v = read_json(cfg.out / "validation.json");
  EXPECT_EQ(v["verdict"], "reject");
  EXPECT_NEAR(v["end_to_end_change"].get<double>(), 0.739, 1e-3);
  EXPECT_NE(out.str().find("73.9%"), std::string::npos);
}

TEST(Commands, PlanLiveWithoutKeyIsConfigError) {
  const auto dir = scratch("live");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg;
  cfg.out = dir;
  cfg.llm.api_key_env = "DOUGH_TEST_KEY_THAT_IS_NEVER_SET";
  const int code = run_guarded([&] { return cmd_plan(cfg, {"donut", true}, io); }, err);
  EXPECT_EQ(code, kExitConfig);
  EXPECT_NE(err.str().find("DOUGH_TEST_KEY_THAT_IS_NEVER_SET"), std::string::npos);
}

TEST(Commands, RunWritesTraceAndClouds) {
  const auto dir = scratch("run");
  std::ostringstream out, err;
  CommandIo io{out, err};
  const RunConfig cfg = tiny(dir);
  ASSERT_EQ(cmd_run(cfg, {"spread", true}, io), kExitOk) << err.str();
  const auto trace = read_json(dir / "trace.json");
  EXPECT_EQ(trace["status"], "done");
  EXPECT_EQ(trace["result"]["task"], "spread");
  EXPECT_LE(trace["result"]["executed_steps"].get<int>(), 4);
  for (const char* f : {"initial.ply", "subgoal_0.ply", "final.ply"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_EQ(read_json(dir / "config.json")["seed"], 0);
  // The copy reproduces the run.
  const RunConfig again = load_run_config(dir / "config.json");
  EXPECT_EQ(to_json(again), to_json(cfg));
}

TEST(Commands, RunHonoursCancel) {
  const auto dir = scratch("cancel");
  std::ostringstream out, err;
  std::atomic<bool> cancel{true};
  CommandIo io{out, err, &cancel};
  EXPECT_EQ(cmd_run(tiny(dir), {"spread", false}, io), kExitRuntime);
  EXPECT_EQ(read_json(dir / "trace.json")["status"], "interrupted");
}

TEST(Commands, DegenerateTaskReportsZero) {
  const auto dir = scratch("degenerate");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg = tiny(dir);
  TaskSpec t = cfg.task("spread");
  t.name = "still";
  t.target = t.initial;
  t.target_shift = 0.0;
  t.target_seed_offset = 0;
  cfg.tasks.push_back(t);
  EXPECT_EQ(cmd_run(cfg, {"still", false}, io), kExitOk) << err.str();
  const auto r = read_json(dir / "trace.json")["result"];
  EXPECT_TRUE(r["degenerate"].get<bool>());
  EXPECT_EQ(r["score"].get<double>(), 0.0);
}

TEST(Commands, BenchReportAndTable) {
  const auto dir = scratch("bench");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg = tiny(dir);
  cfg.bench_trials = 2;
  ASSERT_EQ(cmd_bench(cfg, {"spread,cut"}, io), kExitOk) << err.str();
  const auto rep = read_json(dir / "report.json");
  ASSERT_EQ(rep["tasks"].size(), 2u);
  EXPECT_EQ(rep["tasks"][0]["trials"].size(), 2u);
  std::ifstream txt(dir / "report.txt");
  const std::string table((std::istreambuf_iterator<char>(txt)), {});
  EXPECT_NE(table.find("spread"), std::string::npos);
  EXPECT_NE(table.find("%"), std::string::npos);
  EXPECT_THROW(cmd_bench(cfg, {"spread,nosuch"}, io), ConfigError);
}

TEST(Commands, GradcheckFlagsBrokenComponent) {
  const auto dir = scratch("grad");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg;
  cfg.out = dir;
  EXPECT_EQ(cmd_gradcheck(cfg, {"transport", 4, -1}, io), kExitOk);
  EXPECT_EQ(cmd_gradcheck(cfg, {"transport", 4, 5}, io), kExitRuntime);
  EXPECT_NE(out.str().find("worst component 5"), std::string::npos);
  EXPECT_FALSE(read_json(dir / "gradcheck.json")["pass"].get<bool>());
}

TEST(Commands, GradcheckToleratesOtherEpsilon) {
  const auto dir = scratch("grad_eps");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg = load_run_config(std::nullopt, {"planner.blur_fraction=0.08"});
  cfg.out = dir;
  EXPECT_EQ(cmd_gradcheck(cfg, {"transport", 0, -1}, io), kExitOk) << out.str();
}

TEST(Commands, SpreadRunPrintsPassingScore) {
  const auto dir = scratch("spread");
  std::ostringstream out, err;
  CommandIo io{out, err};
  RunConfig cfg;
  cfg.out = dir;
  ASSERT_EQ(cmd_run(cfg, {"spread", false}, io), kExitOk) << err.str();
  const double score = read_json(dir / "trace.json")["result"]["score"].get<double>();
  EXPECT_GE(score, 0.4);
  EXPECT_NE(out.str().find("score "), std::string::npos);
}

#ifdef DOUGH_CLI_BINARY
int run_binary(const std::string& args) {
  const int status = std::system((std::string(DOUGH_CLI_BINARY) + " " + args +
                                  " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("bin").string();
  EXPECT_EQ(run_binary("plan two_pancakes --out " + dir + "/a"), 0);
  EXPECT_EQ(run_binary("plan donut_corrupted --out " + dir + "/b"), 2);
  EXPECT_EQ(run_binary("plan no_such_fixture --out " + dir + "/c"), 3);
  EXPECT_EQ(run_binary("run spread --set planner.bogus=1 --out " + dir + "/d"), 3);
  EXPECT_EQ(run_binary("frobnicate"), 3);
  EXPECT_EQ(run_binary("gradcheck --module transport --instances 2 --break-component 1 "
                       "--out " + dir + "/e"),
            1);
  EXPECT_EQ(run_binary("gradcheck --module transport --instances 2 --seed 4 --out " + dir +
                       "/f"),
            0);
  EXPECT_EQ(read_json(fs::path(dir) / "f" / "config.json")["seed"], 4);
  EXPECT_EQ(run_binary("plan donut --fixture --out " + dir + "/g"), 0);
  EXPECT_EQ(run_binary("plan donut --fixture --live --out " + dir + "/h"), 3);
  EXPECT_EQ(run_binary("--help"), 0);
}
#endif

}  // namespace
}  // namespace dough
