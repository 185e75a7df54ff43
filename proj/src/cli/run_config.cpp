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


#include "dough/cli/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dough/errors.hpp"

#ifndef DOUGH_FIXTURE_DIR
#define DOUGH_FIXTURE_DIR "fixtures"
#endif

namespace dough {

namespace {

using nlohmann::json;

// Keys of `doc` must exist in `ref`, recursively; lists are not descended.
void check_keys(const json& doc, const json& ref, const std::string& where) {
  if (!doc.is_object()) throw ConfigError("config '" + where + "' must be an object");
  for (const auto& [k, v] : doc.items()) {
    const std::string path = where.empty() ? k : where + "." + k;
    if (!ref.contains(k)) throw ConfigError("unknown config key '" + path + "'");
    if (ref[k].is_object()) check_keys(v, ref[k], path);
  }
}

void merge(json& into, const json& from) {
  for (const auto& [k, v] : from.items()) {
    if (v.is_object() && into.contains(k) && into[k].is_object()) {
      merge(into[k], v);
    } else {
      into[k] = v;
    }
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config '" + where + "." + key + "' missing or of the wrong type");
  }
}

const char* gradient_name(GradientMode m) {
  return m == GradientMode::kAdjoint ? "adjoint" : "finite_difference";
}

}  // namespace

BenchConfig default_bench_config() {
  BenchConfig b;
  b.fixture_dir = DOUGH_FIXTURE_DIR;
  return b;
}

json to_json(const TaskSpec& t) {
  json j = {{"name", t.name},
            {"description", t.description},
            {"initial", t.initial.to_json()},
            {"threshold", t.threshold},
            {"trials", t.trials},
            {"target_shift", t.target_shift},
            {"target_seed_offset", t.target_seed_offset}};
  if (t.target) {
    j["target"] = t.target->to_json();
    j["tool"] = t.tool;
  } else {
    j["fixture"] = t.fixture;
  }
  return j;
}

TaskSpec task_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("task entries must be objects");
  static const std::set<std::string> known = {"name",      "description", "initial",
                                              "target",    "tool",        "fixture",
                                              "threshold", "trials",      "target_shift",
                                              "target_seed_offset"};
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw ConfigError("unknown task key '" + k + "'");
  }
  TaskSpec t;
  t.name = get<std::string>(j, "name", "tasks");
  const std::string where = "tasks." + t.name;
  try {
    t.initial = ShapeProgram::from_json(j.at("initial"));
    if (j.contains("target")) t.target = ShapeProgram::from_json(j["target"]);
  } catch (const InvalidShape& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (j.contains("description")) t.description = get<std::string>(j, "description", where);
  if (j.contains("tool")) t.tool = get<std::string>(j, "tool", where);
  if (j.contains("fixture")) t.fixture = get<std::string>(j, "fixture", where);
  t.threshold = get<double>(j, "threshold", where);
  if (j.contains("trials")) t.trials = get<int>(j, "trials", where);
  if (j.contains("target_shift")) t.target_shift = get<double>(j, "target_shift", where);
  if (j.contains("target_seed_offset")) {
    t.target_seed_offset = get<std::uint64_t>(j, "target_seed_offset", where);
  }
  t.validate();
  return t;
}

json to_json(const RunConfig& c) {
  const PlannerConfig& p = c.bench.planner;
  const SimConfig& s = p.sim;
  json tasks = json::array();
  for (const auto& t : c.tasks) tasks.push_back(to_json(t));
  return {
      {"seed", c.seed},
      {"out", c.out.string()},
      {"planner",
       {{"max_steps", p.max_steps},
        {"K", p.K},
        {"L", p.L},
        {"J", p.J},
        {"learning_rate", p.learning_rate},
        {"alpha", p.alpha},
        {"tau_fraction", p.tau_fraction},
        {"tau_floor", p.tau_floor},
        {"delta_fraction", p.delta_fraction},
        {"placement_grid", p.placement_grid},
        {"blur_fraction", p.blur_fraction},
        {"sinkhorn_max_iters", p.sinkhorn_max_iters},
        {"sinkhorn_tolerance", p.sinkhorn_tolerance}}},
      {"loss", {{"p2p", p.weights.p2p}, {"sdf", p.weights.sdf}, {"velocity", p.weights.velocity}}},
      {"sim",
       {{"dim", s.dim},
        {"grid_res", s.grid_res},
        {"domain", s.domain},
        {"dt", s.dt},
        {"substeps", s.substeps},
        {"gravity", s.gravity},
        {"ground_friction", s.ground_friction},
        {"boundary_cells", s.boundary_cells},
        {"contact_layer_cells", s.contact_layer_cells},
        {"max_speed", s.max_speed},
        {"fd_step", s.fd_step},
        {"gradient", gradient_name(s.gradient)},
        {"material",
         {{"youngs_modulus", s.material.youngs_modulus},
          {"poisson_ratio", s.material.poisson_ratio},
          {"yield_stress", s.material.yield_stress},
          {"density", s.material.density}}}}},
      {"bench",
       {{"particles", c.bench.particles},
        {"fixture_dir", c.bench.fixture_dir.string()},
        {"trials", c.bench_trials}}},
      {"plan", {{"points", c.plan_points}}},
      {"llm",
       {{"endpoint", c.llm.endpoint},
        {"model", c.llm.model},
        {"api_key_env", c.llm.api_key_env},
        {"timeout_s", c.llm.timeout_s},
        {"max_retries", c.llm.max_retries},
        {"retry_backoff_s", c.llm.retry_backoff_s},
        {"temperature", c.llm.temperature}}},
      {"tasks", tasks},
  };
}

RunConfig run_config_from_json(const json& doc) {
  const RunConfig defaults;
  json ref = to_json(defaults);
  check_keys(doc, ref, "");
  json m = ref;
  m.erase("tasks");
  json user = doc;
  json extra_tasks = json::array();
  if (user.contains("tasks")) {
    extra_tasks = user["tasks"];
    user.erase("tasks");
    if (!extra_tasks.is_array()) throw ConfigError("config 'tasks' must be a list");
  }
  merge(m, user);

  RunConfig c;
  c.seed = get<std::uint64_t>(m, "seed", "");
  c.out = get<std::string>(m, "out", "");
  PlannerConfig& p = c.bench.planner;
  const json& jp = m["planner"];
  p.max_steps = get<int>(jp, "max_steps", "planner");
  p.K = get<int>(jp, "K", "planner");
  p.L = get<int>(jp, "L", "planner");
  p.J = get<int>(jp, "J", "planner");
  p.learning_rate = get<double>(jp, "learning_rate", "planner");
  p.alpha = get<double>(jp, "alpha", "planner");
  p.tau_fraction = get<double>(jp, "tau_fraction", "planner");
  p.tau_floor = get<double>(jp, "tau_floor", "planner");
  p.delta_fraction = get<double>(jp, "delta_fraction", "planner");
  p.placement_grid = get<int>(jp, "placement_grid", "planner");
  p.blur_fraction = get<double>(jp, "blur_fraction", "planner");
  p.sinkhorn_max_iters = get<int>(jp, "sinkhorn_max_iters", "planner");
  p.sinkhorn_tolerance = get<double>(jp, "sinkhorn_tolerance", "planner");
  const json& jl = m["loss"];
  p.weights.p2p = get<double>(jl, "p2p", "loss");
  p.weights.sdf = get<double>(jl, "sdf", "loss");
  p.weights.velocity = get<double>(jl, "velocity", "loss");
  SimConfig& s = p.sim;
  const json& js = m["sim"];
  s.dim = get<int>(js, "dim", "sim");
  s.grid_res = get<int>(js, "grid_res", "sim");
  s.domain = get<double>(js, "domain", "sim");
  s.dt = get<double>(js, "dt", "sim");
  s.substeps = get<int>(js, "substeps", "sim");
  s.gravity = get<double>(js, "gravity", "sim");
  s.ground_friction = get<double>(js, "ground_friction", "sim");
  s.boundary_cells = get<int>(js, "boundary_cells", "sim");
  s.contact_layer_cells = get<double>(js, "contact_layer_cells", "sim");
  s.max_speed = get<double>(js, "max_speed", "sim");
  s.fd_step = get<double>(js, "fd_step", "sim");
  const auto grad = get<std::string>(js, "gradient", "sim");
  if (grad == "adjoint") {
    s.gradient = GradientMode::kAdjoint;
  } else if (grad == "finite_difference") {
    s.gradient = GradientMode::kFiniteDifference;
  } else {
    throw ConfigError("sim.gradient must be 'adjoint' or 'finite_difference'");
  }
  const json& jm = js["material"];
  s.material.youngs_modulus = get<double>(jm, "youngs_modulus", "sim.material");
  s.material.poisson_ratio = get<double>(jm, "poisson_ratio", "sim.material");
  s.material.yield_stress = get<double>(jm, "yield_stress", "sim.material");
  s.material.density = get<double>(jm, "density", "sim.material");
  const json& jb = m["bench"];
  const int particles = get<int>(jb, "particles", "bench");
  if (particles < 1) throw ConfigError("bench.particles must be >= 1");
  c.bench.particles = static_cast<std::size_t>(particles);
  c.bench.fixture_dir = get<std::string>(jb, "fixture_dir", "bench");
  c.bench_trials = get<int>(jb, "trials", "bench");
  const int points = get<int>(m["plan"], "points", "plan");
  if (points < 1) throw ConfigError("plan.points must be >= 1");
  c.plan_points = static_cast<std::size_t>(points);
  const json& jq = m["llm"];
  c.llm.endpoint = get<std::string>(jq, "endpoint", "llm");
  c.llm.model = get<std::string>(jq, "model", "llm");
  c.llm.api_key_env = get<std::string>(jq, "api_key_env", "llm");
  c.llm.timeout_s = get<double>(jq, "timeout_s", "llm");
  c.llm.max_retries = get<int>(jq, "max_retries", "llm");
  c.llm.retry_backoff_s = get<double>(jq, "retry_backoff_s", "llm");
  c.llm.temperature = get<double>(jq, "temperature", "llm");

  for (const auto& jt : extra_tasks) {
    TaskSpec t = task_from_json(jt);
    auto it = std::find_if(c.tasks.begin(), c.tasks.end(),
                           [&](const TaskSpec& x) { return x.name == t.name; });
    if (it != c.tasks.end()) {
      *it = std::move(t);
    } else {
      c.tasks.push_back(std::move(t));
    }
  }
  c.validate();
  return c;
}

void RunConfig::validate() const {
  bench.planner.validate();
  llm.validate();
  if (bench_trials < 0) throw ConfigError("bench.trials must be >= 0");
  if (plan_points == 0) throw ConfigError("plan.points must be positive");
  namespace fs = std::filesystem;
  if (!fs::is_directory(bench.fixture_dir)) {
    throw ConfigError("fixture directory '" + bench.fixture_dir.string() + "' does not exist");
  }
  std::set<std::string> names;
  for (const auto& t : tasks) {
    t.validate();
    if (!names.insert(t.name).second) throw ConfigError("duplicate task '" + t.name + "'");
    if (t.multi_tool() && !fs::is_regular_file(bench.fixture_dir / (t.fixture + ".json"))) {
      throw ConfigError("task '" + t.name + "' references missing fixture '" + t.fixture + "'");
    }
  }
}

TaskSpec RunConfig::task(const std::string& name) const {
  for (const auto& t : tasks) {
    if (t.name == name) return t;
  }
  throw ConfigError("unknown task '" + name + "'");
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot read config file '" + file->string() + "'");
    try {
      doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError("config file '" + file->string() + "': " + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config file must hold a JSON object");
    const auto base = file->parent_path();
    auto resolve = [&](json& node, const char* key) {
      if (node.is_object() && node.contains(key) && node[key].is_string()) {
        const std::filesystem::path p = node[key].get<std::string>();
        if (p.is_relative()) node[key] = (base / p).lexically_normal().string();
      }
    };
    resolve(doc, "out");
    if (doc.contains("bench")) resolve(doc["bench"], "fixture_dir");
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override '" + o + "' is not key=value");
    }
    const std::string value = o.substr(eq + 1);
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    json* node = &doc;
    std::string key = o.substr(0, eq);
    std::size_t dot;
    while ((dot = key.find('.')) != std::string::npos) {
      json& child = (*node)[key.substr(0, dot)];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) throw ConfigError("override '" + o + "' descends into a value");
      node = &child;
      key = key.substr(dot + 1);
    }
    (*node)[key] = parsed;
  }
  return run_config_from_json(doc);
}

}  // namespace dough
