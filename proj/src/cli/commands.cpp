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


#include "dough/cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "dough/errors.hpp"
#include "dough/eval/gradcheck.hpp"
#include "dough/geometry/ply.hpp"

namespace dough {

namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f.flush()) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  // Write-then-rename so a reader never sees half a trace.
  const fs::path tmp = path.string() + ".tmp";
  write_text(tmp, j.dump(2) + "\n");
  fs::rename(tmp, path);
}

// The copy loads back with --config.
void prepare_out(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out);
  write_json(cfg.out / "config.json", to_json(cfg));
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string percent(double v) { return fixed(100.0 * v, 1) + "%"; }

// Catalog entry by name, else the catalog entry that uses this fixture.
std::optional<TaskSpec> lookup_task(const RunConfig& cfg, const std::string& name) {
  for (const auto& t : cfg.tasks) {
    if (t.name == name) return t;
  }
  for (const auto& t : cfg.tasks) {
    if (t.fixture == name) return t;
  }
  return std::nullopt;
}

}  // namespace

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const PlanParseError& e) {
    err << "plan rejected: " << e.what() << "\n";
    return kExitRejected;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int cmd_plan(const RunConfig& cfg, const PlanOptions& opt, CommandIo& io) {
  prepare_out(cfg);
  const std::optional<TaskSpec> known = lookup_task(cfg, opt.task);
  std::string text;
  if (known) {
    text = known->description;
  } else if (opt.live) {
    throw ConfigError("unknown task '" + opt.task + "'; live planning needs a task description");
  } else {
    text = opt.task;
    std::replace(text.begin(), text.end(), '_', ' ');
  }
  if (text.empty()) text = opt.task;

  LlmClientConfig llm = cfg.llm;
  if (opt.live) {
    llm.fixture_dir.reset();
  } else {
    llm.fixture_dir = cfg.bench.fixture_dir;
  }
  const std::string prompt = build_prompt(text, default_tool_catalog(), default_guidelines());
  write_text(cfg.out / "prompt.txt", prompt);

  const std::string raw = request_plan(llm, prompt, opt.task);
  write_text(cfg.out / "raw_response.txt", raw);
  const PlanResponse plan = parse_plan(raw);
  write_json(cfg.out / "plan.json", to_json(plan));
  for (const auto& w : plan.warnings) io.err << "warning: " << w << "\n";

  std::optional<ShapeProgram> initial = plan.initial_shape;
  if (!initial && known) initial = known->initial;
  if (!initial) throw ConfigError("plan has no initial_shape and task '" + opt.task + "' is unknown");
  const double v0 = shape_volume(*initial, kDefaultVolumeSamples, cfg.seed).value;

  const ValidationReport rep = validate_plan(plan, v0);
  write_json(cfg.out / "validation.json", to_json(rep));

  const auto clouds = compile_subgoals(plan, cfg.plan_points, cfg.seed, 3);
  for (std::size_t k = 0; k < clouds.size(); ++k) {
    write_ply(cfg.out / ("stage_" + std::to_string(k) + ".ply"), clouds[k]);
  }

  io.out << "plan " << opt.task << ": " << plan.stages.size() << " stages\n";
  io.out << "initial volume " << std::scientific << std::setprecision(4) << v0
         << std::defaultfloat << "\n";
  for (const auto& s : rep.stages) {
    io.out << "  stage " << s.stage << " " << plan.stages[s.stage].tool_name << "  in "
           << std::scientific << std::setprecision(4) << s.input_volume << "  shape "
           << s.program_volume << std::defaultfloat << "  change " << percent(s.change) << "\n";
  }
  io.out << "end-to-end volume change " << percent(rep.end_to_end_change) << "\n";
  for (const auto& e : rep.flow_errors) io.out << "  flow: " << e << "\n";
  for (const auto& m : rep.messages) io.out << "  " << m << "\n";
  io.out << "verdict: " << to_string(rep.verdict) << "\n";
  return rep.verdict == Verdict::kReject ? kExitRejected : kExitOk;
}

int cmd_run(const RunConfig& cfg, const RunOptions& opt, CommandIo& io) {
  prepare_out(cfg);
  const TaskSpec task = cfg.task(opt.task);
  const fs::path trace_path = cfg.out / "trace.json";

  PlannerHooks hooks;
  hooks.cancel = io.cancel;
  std::size_t updates = 0;
  hooks.on_update = [&](const PlanTrace& tr) {
    ++updates;
    write_json(trace_path, {{"task", task.name},
                            {"seed", cfg.seed},
                            {"status", "running"},
                            {"current_stage", to_json(tr, false)}});
  };
  const TrialRun run = run_trial(task, cfg.bench, cfg.seed, hooks);
  const TrialResult& r = run.result;

  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t k = 0; k < run.traces.size(); ++k) {
    stages.push_back({{"tool", run.stage_tools[k]}, {"trace", to_json(run.traces[k], false)}});
  }
  const bool interrupted = r.stop_reason == "interrupted";
  std::string status = "done";
  if (!r.error.empty()) status = "failed";
  if (interrupted) status = "interrupted";
  write_json(trace_path, {{"task", task.name},
                          {"seed", cfg.seed},
                          {"status", status},
                          {"result", to_json(r)},
                          {"stages", stages}});

  write_ply(cfg.out / "initial.ply", run.initial);
  for (std::size_t k = 0; k < run.subgoals.size(); ++k) {
    write_ply(cfg.out / ("subgoal_" + std::to_string(k) + ".ply"), run.subgoals[k]);
  }
  const PointCloud final_cloud =
      run.traces.empty() ? run.initial : run.traces.back().final_state.positions();
  write_ply(cfg.out / "final.ply", final_cloud);
  if (opt.trajectory) {
    for (std::size_t k = 0; k < run.traces.size(); ++k) {
      dump_trajectory(run.traces[k].trajectory,
                      cfg.out / "trajectory" / ("stage_" + std::to_string(k)));
    }
  }

  io.out << "task " << task.name << " seed " << cfg.seed << "\n";
  for (std::size_t k = 0; k < run.traces.size(); ++k) {
    const PlanTrace& tr = run.traces[k];
    io.out << "  stage " << k << " " << run.stage_tools[k] << ": " << tr.executed_steps
           << " steps, " << tr.resets << " resets, emd " << std::scientific
           << std::setprecision(3) << tr.initial_emd << " -> " << tr.final_emd
           << std::defaultfloat << " (" << tr.stop_reason << ")\n";
  }
  if (r.degenerate) io.out << "target equals start; score undefined, reported as 0\n";
  io.out << "score " << fixed(r.score) << " (threshold " << fixed(task.threshold, 2) << ") "
         << (r.success ? "success" : "fail") << "\n";
  if (interrupted) {
    io.err << "interrupted; partial trace in " << trace_path.string() << "\n";
    return kExitRuntime;
  }
  if (!r.error.empty()) {
    io.err << "trial failed: " << r.error << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg, const BenchOptions& opt, CommandIo& io) {
  prepare_out(cfg);
  std::vector<TaskSpec> tasks;
  if (opt.suite == "single" || opt.suite == "multi" || opt.suite == "all") {
    for (const auto& t : cfg.tasks) {
      const bool multi = t.multi_tool();
      if (opt.suite == "all" || (opt.suite == "multi") == multi) tasks.push_back(t);
    }
  } else {
    std::stringstream ss(opt.suite);
    std::string name;
    while (std::getline(ss, name, ',')) {
      if (!name.empty()) tasks.push_back(cfg.task(name));
    }
  }
  if (tasks.empty()) throw ConfigError("suite '" + opt.suite + "' selects no tasks");
  if (cfg.bench_trials > 0) {
    for (auto& t : tasks) t.trials = cfg.bench_trials;
  }

  BenchHooks hooks;
  hooks.cancel = io.cancel;
  hooks.on_trial = [&](const TrialResult& r) {
    io.out << r.task << " seed " << r.seed << " score " << fixed(r.score) << " "
           << (r.success ? "ok" : "miss") << " " << fixed(r.seconds, 1) << "s";
    if (!r.error.empty()) io.out << " error: " << r.error;
    io.out << "\n" << std::flush;
  };
  const auto reports = run_benchmark(tasks, cfg.bench, cfg.seed, {}, hooks);

  nlohmann::json doc = to_json(reports);
  doc["base_seed"] = cfg.seed;
  const bool interrupted = io.cancel != nullptr && io.cancel->load();
  doc["interrupted"] = interrupted;
  write_json(cfg.out / "report.json", doc);
  const std::string table = format_table(reports);
  write_text(cfg.out / "report.txt", table);
  io.out << table;
  if (interrupted) {
    io.err << "interrupted; partial report written\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, const GradcheckCommandOptions& opt, CommandIo& io) {
  prepare_out(cfg);
  const std::set<std::string> allowed = {"transport", "physics", "all"};
  if (!allowed.count(opt.module)) throw ConfigError("unknown gradcheck module '" + opt.module + "'");
  GradcheckOptions go;
  go.seed = cfg.seed;
  go.instances = opt.instances;
  go.break_component = opt.break_component;

  std::vector<GradcheckReport> reports;
  if (opt.module != "physics") {
    reports.push_back(transport_gradcheck(go, cfg.bench.planner.blur_fraction));
  }
  if (opt.module != "transport") reports.push_back(physics_gradcheck(go, cfg.bench.planner.sim));

  nlohmann::json doc = nlohmann::json::array();
  bool ok = true;
  for (const auto& rep : reports) {
    nlohmann::json cases = nlohmann::json::array();
    for (const auto& c : rep.cases) {
      cases.push_back({{"seed", c.seed},
                       {"relative_error", c.relative_error},
                       {"worst_component", c.worst_component},
                       {"pass", c.pass}});
      if (!c.pass) {
        io.out << rep.module << " seed " << c.seed << ": relative error " << std::scientific
               << std::setprecision(3) << c.relative_error << std::defaultfloat
               << " exceeds " << rep.tolerance << ", worst component " << c.worst_component
               << "\n";
      }
    }
    doc.push_back({{"module", rep.module},
                   {"tolerance", rep.tolerance},
                   {"required", rep.required},
                   {"passed", rep.passed()},
                   {"pass", rep.pass()},
                   {"seconds", rep.seconds},
                   {"cases", cases}});
    io.out << rep.module << ": " << rep.passed() << "/" << rep.cases.size()
           << " within tolerance (need " << rep.required << ") " << fixed(rep.seconds, 2) << "s "
           << (rep.pass() ? "PASS" : "FAIL") << "\n";
    ok = ok && rep.pass();
  }
  write_json(cfg.out / "gradcheck.json", {{"modules", doc}, {"pass", ok}});
  return ok ? kExitOk : kExitRuntime;
}

}  // namespace dough
