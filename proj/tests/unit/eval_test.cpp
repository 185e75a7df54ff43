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


#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dough/errors.hpp"
#include "dough/eval/benchmark.hpp"

namespace dough {
namespace {

PointCloud random_cloud(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) pts.emplace_back(g(rng), g(rng), g(rng));
  return PointCloud(pts);
}

SinkhornParams params_for(const PointCloud& a, const PointCloud& b) {
  return SinkhornParams::for_clouds(a, b);
}

TEST(Score, Identities) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p0 = random_cloud(rng, 12);
    const auto ps = random_cloud(rng, 12).translated(Vec3(1.0, 0.0, 0.0));
    const auto sp = params_for(p0, ps);
    EXPECT_NEAR(normalized_score(p0, ps, ps, sp), 1.0, 1e-6);
    EXPECT_NEAR(normalized_score(p0, p0, ps, sp), 0.0, 1e-9);
  }
}

// With a rigid translation t between clouds the debiased divergence is
// exactly |t|^2 / 2: the cross terms of the cost integrate to constants
// under fixed marginals.
TEST(Score, TranslationOracle) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_cloud(rng, 8, 0.1);
    const Vec3 t0(0.3, -0.1, 0.2), t1(0.1, 0.05, -0.02);
    const auto p0 = x.translated(t0), pT = x.translated(t1);
    const auto sp = params_for(p0, x);
    const double expected = 1.0 - t1.squaredNorm() / t0.squaredNorm();
    EXPECT_NEAR(normalized_score(p0, pT, x, sp), expected, 1e-6);
  }
  // Single points: S = |a - c|^2 / 2.
  const PointCloud a({Vec3(1, 0, 0)}), b({Vec3(0.5, 0.5, 0)}), c({Vec3(0, 0, 0)});
  EXPECT_NEAR(normalized_score(a, b, c, params_for(a, c)), 0.5, 1e-6);
  // Moving away gives a negative score.
  const PointCloud far({Vec3(2, 0, 0)});
  EXPECT_NEAR(normalized_score(a, far, c, params_for(a, c)), -3.0, 1e-6);
}

TEST(Score, TranslationInvariant) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p0 = random_cloud(rng, 10), pT = random_cloud(rng, 10, 0.5),
               ps = random_cloud(rng, 10, 0.3).translated(Vec3(0.5, 0.5, 0));
    const Vec3 t(3.0, -2.0, 1.0);
    const auto sp = params_for(p0, ps);
    EXPECT_NEAR(normalized_score(p0, pT, ps, sp),
                normalized_score(p0.translated(t), pT.translated(t), ps.translated(t), sp), 1e-6);
  }
}

TEST(Score, DegenerateDenominator) {
  std::mt19937_64 rng(24);
  const auto p = random_cloud(rng, 6);
  EXPECT_THROW(normalized_score(p, p, p, params_for(p, p)), DomainError);
}

TEST(Tasks, CatalogThresholds) {
  const std::pair<const char*, double> expected[] = {{"spread", 0.4},  {"cut", 0.4},
                                                     {"arrange", 0.7}, {"donut", 0.3},
                                                     {"baguette", 0.5}, {"two_pancakes", 0.85}};
  const auto cat = task_catalog();
  ASSERT_EQ(cat.size(), 6u);
  for (std::size_t i = 0; i < cat.size(); ++i) {
    EXPECT_EQ(cat[i].name, expected[i].first);
    EXPECT_DOUBLE_EQ(cat[i].threshold, expected[i].second);
    EXPECT_NO_THROW(cat[i].validate());
    EXPECT_EQ(cat[i].multi_tool(), i >= 3);
  }
  EXPECT_THROW(find_task("pizza"), ConfigError);
  TaskSpec bad = find_task("cut");
  bad.threshold = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = find_task("cut");
  bad.tool = "spoon";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Tasks, SuccessIsInclusive) {
  EXPECT_TRUE(success(0.41, find_task("spread")));
  EXPECT_FALSE(success(0.29, find_task("donut")));
  EXPECT_TRUE(success(0.7, find_task("arrange")));
  EXPECT_FALSE(success(-1.0, find_task("arrange")));
}

BenchConfig tiny_config() {
  BenchConfig cfg;
  cfg.fixture_dir = DOUGH_FIXTURE_DIR;
  cfg.particles = 40;
  cfg.planner.max_steps = 4;
  cfg.planner.L = 2;
  cfg.planner.J = 1;
  cfg.planner.K = 2;
  return cfg;
}

TEST(Trial, PrepareSingleAndMultiTool) {
  const auto cfg = tiny_config();
  const Vec3 off = table_to_sim(cfg.planner.sim);
  auto run = prepare_trial(find_task("spread"), cfg, 2);
  ASSERT_EQ(run.subgoals.size(), 1u);
  EXPECT_EQ(run.stage_tools, std::vector<std::string>{"rolling_pin"});
  EXPECT_EQ(run.initial.size(), 40u);
  EXPECT_NEAR(run.initial.centroid().x(), off.x(), 0.03);
  for (const auto& p : run.initial) EXPECT_GE(p.y(), off.y());

  // seed % 5 == 4 shifts the target by +shift.
  const auto a = prepare_trial(find_task("spread"), cfg, 4);
  const auto b = prepare_trial(find_task("spread"), cfg, 2);
  EXPECT_GT(a.subgoals[0].centroid().x(), b.subgoals[0].centroid().x() + 0.02);

  run = prepare_trial(find_task("two_pancakes"), cfg, 0);
  ASSERT_EQ(run.subgoals.size(), 2u);
  EXPECT_EQ(run.stage_tools, (std::vector<std::string>{"rolling_pin", "knife"}));
  for (const auto& p : run.subgoals[1]) EXPECT_GE(p.y(), off.y() - 1e-12);

  auto missing = tiny_config();
  missing.fixture_dir = "/nonexistent";
  EXPECT_THROW(prepare_trial(find_task("donut"), missing, 0), ConfigError);
}

TEST(Benchmark, OneTaskFiveTrials) {
  const auto reports = run_benchmark({find_task("arrange")}, tiny_config(), 10);
  ASSERT_EQ(reports.size(), 1u);
  const auto& rep = reports[0];
  ASSERT_EQ(rep.trials.size(), 5u);
  int wins = 0;
  for (std::size_t i = 0; i < rep.trials.size(); ++i) {
    EXPECT_EQ(rep.trials[i].seed, 10 + i);
    EXPECT_TRUE(rep.trials[i].error.empty()) << rep.trials[i].error;
    EXPECT_LE(rep.trials[i].executed_steps, 4);
    EXPECT_TRUE(rep.trials[i].monotone);
    wins += rep.trials[i].success;
  }
  EXPECT_DOUBLE_EQ(rep.success_rate, wins / 5.0);
  // Aggregation depends on the rows only.
  const auto again = aggregate(rep.task, rep.threshold, rep.trials);
  EXPECT_EQ(to_json(std::vector<ScoreReport>{again}), to_json(reports));
}

TEST(Benchmark, DegenerateTaskScoresZero) {
  TaskSpec t = find_task("spread");
  t.name = "still";
  t.target = t.initial;
  t.target_shift = 0.0;
  t.target_seed_offset = 0;
  t.trials = 2;
  const auto rep = run_benchmark({t}, tiny_config(), 0)[0];
  ASSERT_EQ(rep.trials.size(), 2u);
  EXPECT_EQ(rep.mean_score, 0.0);
  EXPECT_EQ(rep.success_rate, 0.0);
  for (const auto& r : rep.trials) {
    EXPECT_EQ(r.executed_steps, 0);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(r.error.empty()) << r.error;
  }
}

TEST(Benchmark, MultiToolStagesRunInOrder) {
  auto cfg = tiny_config();
  const auto run = run_trial(find_task("donut"), cfg, 1);
  EXPECT_TRUE(run.result.error.empty()) << run.result.error;
  ASSERT_EQ(run.traces.size(), 2u);
  EXPECT_EQ(run.result.stages, 2);
  EXPECT_EQ(run.result.executed_steps,
            run.traces[0].executed_steps + run.traces[1].executed_steps);
}

TEST(Report, TableAndJson) {
  TrialResult a, b;
  a.task = b.task = "spread";
  a.score = 0.7;
  a.success = true;
  b.score = 0.66;
  b.success = true;
  TrialResult c = a;
  c.task = "cut";
  c.score = -0.25;
  c.success = false;
  const std::vector<ScoreReport> reps = {aggregate("spread", 0.4, {a, b}),
                                         aggregate("cut", 0.4, {c})};
  EXPECT_NEAR(reps[0].mean_score, 0.68, 1e-12);
  const std::string table = format_table(reps);
  EXPECT_NE(table.find("0.680/100%"), std::string::npos) << table;
  EXPECT_NE(table.find("-0.250/0%"), std::string::npos) << table;
  EXPECT_NE(table.find("spread"), std::string::npos);
  const auto j = to_json(reps);
  EXPECT_EQ(j["tasks"].size(), 2u);
  EXPECT_EQ(j["tasks"][0]["trials"].size(), 2u);
  EXPECT_DOUBLE_EQ(j["tasks"][1]["success_rate"].get<double>(), 0.0);
}

}  // namespace
}  // namespace dough
