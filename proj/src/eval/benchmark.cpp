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


#include "dough/eval/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dough/errors.hpp"
#include "dough/hlp/hlp.hpp"

namespace dough {

namespace {

double degenerate_bound(const PointCloud& a, const PointCloud& b) {
  const double d = aabb(a).merged(aabb(b)).diagonal();
  return 1e-12 * d * d;
}

double score_of(double e0, double eT, double bound) {
  if (!(e0 > bound)) {
    throw DomainError("initial divergence to the target is degenerate; score undefined");
  }
  return (e0 - eT) / e0;
}

PointCloud sample(const ShapeProgram& prog, std::size_t n, std::uint64_t seed,
                  const SimConfig& sim) {
  PointCloud pc = sim.dim == 2 ? sample_shape_slice(prog, n, seed) : sample_shape(prog, n, seed);
  return pc.translated(table_to_sim(sim));
}

bool accepted_decreasing(const PlanTrace& t) {
  double last = std::numeric_limits<double>::infinity();
  for (const auto& it : t.iterations) {
    if (!it.accepted) continue;
    if (!(it.emd_curr < last)) return false;
    last = it.emd_curr;
  }
  return true;
}

}  // namespace

double normalized_score(const PointCloud& p0, const PointCloud& pT, const PointCloud& pstar,
                        const SinkhornParams& sp) {
  const double e0 = sinkhorn_divergence(p0, pstar, sp);
  const double bound = degenerate_bound(p0, pstar);
  if (!(e0 > bound)) return score_of(e0, 0.0, bound);
  return score_of(e0, sinkhorn_divergence(pT, pstar, sp), bound);
}

void TaskSpec::validate() const {
  if (name.empty()) throw ConfigError("task without a name");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("task '" + name + "': threshold must lie in (0, 1)");
  }
  if (trials < 1) throw ConfigError("task '" + name + "': trials must be >= 1");
  if (multi_tool()) {
    if (fixture.empty()) throw ConfigError("task '" + name + "' has neither target nor fixture");
  } else {
    (void)ToolSpec::by_name(tool);
  }
}

std::vector<TaskSpec> task_catalog() {
  std::vector<TaskSpec> out;
  {
    TaskSpec t;
    t.name = "spread";
    t.description = "Spread the ball of dough into a thin round sheet.";
    t.initial = Sphere{Vec3(0.0, 0.08, 0.0), 0.08};
    t.target = Ellipsoid{Vec3(0.0, 0.0457, 0.0), Vec3(0.14, 0.0457, 0.14)};
    t.tool = "rolling_pin";
    t.threshold = 0.4;
    t.target_shift = 0.04;
    out.push_back(t);
  }
  {
    TaskSpec t;
    t.name = "cut";
    t.description = "Cut the bar of dough into two pieces and move them apart.";
    t.initial = Box{Vec3(0.0, 0.04, 0.0), Vec3(0.16, 0.04, 0.05)};
    t.target = ShapeProgram::union_of({Box{Vec3(-0.095, 0.04, 0.0), Vec3(0.065, 0.04, 0.05)},
                                       Box{Vec3(0.095, 0.04, 0.0), Vec3(0.065, 0.04, 0.05)}});
    t.tool = "knife";
    t.threshold = 0.4;
    t.target_shift = 0.04;
    out.push_back(t);
  }
  {
    TaskSpec t;
    t.name = "arrange";
    t.description = "Move the block of dough to the right without deforming it.";
    t.initial = Box{Vec3(-0.1, 0.05, 0.0), Vec3(0.05, 0.05, 0.05)};
    t.target = Box{Vec3(0.05, 0.05, 0.0), Vec3(0.05, 0.05, 0.05)};
    t.tool = "gripper";
    t.threshold = 0.7;
    t.target_shift = 0.04;
    out.push_back(t);
  }
  const ShapeProgram ball = Sphere{Vec3(0.0, 0.08, 0.0), 0.08};
  struct Multi {
    const char* name;
    const char* text;
    double threshold;
  };
  for (const auto& [name, text, thr] :
       {Multi{"donut", "The dough is a ball. Make a donut.", 0.3},
        Multi{"baguette", "The dough is a ball. Make a baguette.", 0.5},
        Multi{"two_pancakes", "The dough is an elongated box. Make two pancakes.", 0.85}}) {
    TaskSpec t;
    t.name = name;
    t.description = text;
    t.fixture = name;
    t.initial = ball;
    t.threshold = thr;
    out.push_back(t);
  }
  out.back().initial = Box{Vec3(0.0, 0.04, 0.0), Vec3(0.16, 0.04, 0.06)};
  return out;
}

TaskSpec find_task(const std::string& name) {
  for (auto& t : task_catalog()) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown task '" + name + "'");
}

bool success(double score, const TaskSpec& task) { return score >= task.threshold; }

Vec3 table_to_sim(const SimConfig& sim) {
  return Vec3(0.5 * sim.domain, sim.ground_height(), sim.dim == 3 ? 0.5 * sim.domain : 0.0);
}

TrialRun prepare_trial(const TaskSpec& task, const BenchConfig& cfg, std::uint64_t seed) {
  task.validate();
  const SimConfig& sim = cfg.planner.sim;
  TrialRun run(sample(task.initial, cfg.particles, seed, sim));
  run.result.task = task.name;
  run.result.seed = seed;
  const std::uint64_t tseed = seed + task.target_seed_offset;
  if (!task.multi_tool()) {
    const double shift = task.target_shift * (static_cast<double>(seed % 5) - 2.0) / 2.0;
    run.subgoals.push_back(
        sample(ShapeProgram::translate(Vec3(shift, 0.0, 0.0), *task.target), cfg.particles,
               tseed, sim));
    run.stage_tools.push_back(task.tool);
    return run;
  }
  LlmClientConfig llm;
  llm.fixture_dir = cfg.fixture_dir;
  const PlanResponse plan = parse_plan(request_plan(llm, "", task.fixture));
  for (const auto& cloud : compile_subgoals(plan, cfg.particles, tseed, sim.dim)) {
    run.subgoals.push_back(cloud.translated(table_to_sim(sim)));
  }
  for (const auto& s : plan.stages) run.stage_tools.push_back(s.tool_name);
  return run;
}

TrialRun run_trial(const TaskSpec& task, const BenchConfig& cfg, std::uint64_t seed,
                   const PlannerHooks& hooks) {
  const auto t0 = std::chrono::steady_clock::now();
  TrialRun run = prepare_trial(task, cfg, seed);
  TrialResult& r = run.result;
  try {
    SimState s = make_state(run.initial, cfg.planner.sim);
    for (std::size_t k = 0; k < run.subgoals.size(); ++k) {
      run.traces.push_back(mpc_run(s, run.subgoals[k], ToolSpec::by_name(run.stage_tools[k]),
                                   cfg.planner, std::nullopt, hooks));
      const PlanTrace& tr = run.traces.back();
      r.executed_steps += tr.executed_steps;
      r.resets += tr.resets;
      r.stop_reason = tr.stop_reason;
      r.monotone = r.monotone && accepted_decreasing(tr);
      s = tr.final_state;
      if (tr.interrupted) break;
    }
    r.stages = static_cast<int>(run.traces.size());
    const PointCloud& target = run.subgoals.back();
    const SinkhornParams sp = planner_sinkhorn(run.initial, target, cfg.planner);
    r.initial_emd = sinkhorn_divergence(run.initial, target, sp);
    r.final_emd = sinkhorn_divergence(s.positions(), target, sp);
    if (r.initial_emd > degenerate_bound(run.initial, target)) {
      r.score = score_of(r.initial_emd, r.final_emd, degenerate_bound(run.initial, target));
      r.success = success(r.score, task);
    } else {
      r.degenerate = true;
    }
  } catch (const std::exception& e) {
    r.stages = static_cast<int>(run.traces.size());
    r.score = 0.0;
    r.success = false;
    r.error = e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

ScoreReport aggregate(const std::string& task, double threshold,
                      const std::vector<TrialResult>& trials) {
  ScoreReport rep;
  rep.task = task;
  rep.threshold = threshold;
  rep.trials = trials;
  if (trials.empty()) return rep;
  int wins = 0;
  for (const auto& t : trials) {
    rep.mean_score += t.score;
    wins += t.success ? 1 : 0;
    rep.seconds += t.seconds;
  }
  rep.mean_score /= static_cast<double>(trials.size());
  rep.success_rate = static_cast<double>(wins) / static_cast<double>(trials.size());
  return rep;
}

std::vector<ScoreReport> run_benchmark(const std::vector<TaskSpec>& tasks, const BenchConfig& cfg,
                                       std::uint64_t base_seed,
                                       const std::vector<std::uint64_t>& seeds,
                                       const BenchHooks& hooks) {
  cfg.planner.validate();
  for (const auto& t : tasks) (void)prepare_trial(t, cfg, base_seed);  // fail fast on config
  auto cancelled = [&] { return hooks.cancel != nullptr && hooks.cancel->load(); };
  PlannerHooks ph;
  ph.cancel = hooks.cancel;
  std::vector<ScoreReport> out;
  for (const auto& t : tasks) {
    if (cancelled()) break;
    std::vector<TrialResult> rows;
    const std::size_t n = seeds.empty() ? static_cast<std::size_t>(t.trials) : seeds.size();
    for (std::size_t i = 0; i < n && !cancelled(); ++i) {
      const std::uint64_t seed = seeds.empty() ? base_seed + i : seeds[i];
      rows.push_back(run_trial(t, cfg, seed, ph).result);
      if (hooks.on_trial) hooks.on_trial(rows.back());
    }
    out.push_back(aggregate(t.name, t.threshold, rows));
  }
  return out;
}

LocalMinimumScenario make_local_minimum_scenario(const SimConfig& sim, std::size_t particles,
                                                 std::uint64_t seed) {
  const double g = sim.ground_height();
  const double x = 0.35 * sim.domain;
  const double z = sim.dim == 3 ? 0.5 * sim.domain : 0.0;
  const ShapeProgram lump = Sphere{Vec3(x, g + 0.07, z), 0.07};
  const ShapeProgram flat = Ellipsoid{Vec3(x, g + 0.035, z), Vec3(0.14, 0.035, 0.14)};
  auto draw = [&](const ShapeProgram& p, std::uint64_t s) {
    return sim.dim == 2 ? sample_shape_slice(p, particles, s, z) : sample_shape(p, particles, s);
  };
  const ToolSpec pin = ToolSpec::by_name("rolling_pin");
  ToolPose pose;
  pose.position = Vec3(x + 0.12, g + pin.geometry.radius, z);
  return {make_state(draw(lump, seed), sim), draw(flat, seed + 1000), pin, pose};
}

ResetSummary summarize_resets(const PlanTrace& trace) {
  ResetSummary out;
  out.best_before = trace.initial_emd;
  out.best_after = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& it = trace.iterations[i];
    if (it.reset && out.first_reset < 0) out.first_reset = static_cast<int>(i);
    const bool committed = it.accepted || it.outcome == "threshold";
    if (!committed) continue;
    if (out.first_reset < 0) {
      out.best_before = std::min(out.best_before, it.emd_curr);
    } else {
      out.best_after = std::min(out.best_after, it.emd_curr);
    }
  }
  return out;
}

nlohmann::json to_json(const TrialResult& r) {
  nlohmann::json j = {{"task", r.task},
                      {"seed", r.seed},
                      {"score", r.score},
                      {"success", r.success},
                      {"degenerate", r.degenerate},
                      {"initial_emd", r.initial_emd},
                      {"final_emd", r.final_emd},
                      {"executed_steps", r.executed_steps},
                      {"resets", r.resets},
                      {"stages", r.stages},
                      {"stop_reason", r.stop_reason},
                      {"monotone", r.monotone},
                      {"seconds", r.seconds}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

nlohmann::json to_json(const std::vector<ScoreReport>& reports) {
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& rep : reports) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& t : rep.trials) rows.push_back(to_json(t));
    tasks.push_back({{"task", rep.task},
                     {"threshold", rep.threshold},
                     {"mean_score", rep.mean_score},
                     {"success_rate", rep.success_rate},
                     {"seconds", rep.seconds},
                     {"trials", rows}});
  }
  return {{"tasks", tasks}};
}

std::string format_table(const std::vector<ScoreReport>& reports, const std::string& method) {
  std::vector<std::string> head = {"method"}, row = {method};
  for (const auto& r : reports) {
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(3) << r.mean_score << "/"
         << std::setprecision(0) << 100.0 * r.success_rate << "%";
    head.push_back(r.task);
    row.push_back(cell.str());
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::size_t w = std::max(head[i].size(), row[i].size());
      out << (i == 0 ? "" : " | ") << std::left << std::setw(static_cast<int>(w)) << cells[i];
    }
    out << "\n";
  };
  line(head);
  for (std::size_t i = 0; i < head.size(); ++i) {
    const std::size_t w = std::max(head[i].size(), row[i].size());
    out << (i == 0 ? "" : "-+-") << std::string(w, '-');
  }
  out << "\n";
  line(row);
  return out.str();
}

}  // namespace dough
