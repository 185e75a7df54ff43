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


#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "dough/hlp/hlp.hpp"
#include "dough/physics/sim.hpp"

namespace dough {

namespace {

using nlohmann::json;

// First fenced block that parses as an object, else the outermost braces.
json extract_document(const std::string& raw) {
  std::size_t pos = 0;
  while ((pos = raw.find("```", pos)) != std::string::npos) {
    const std::size_t line_end = raw.find('\n', pos);
    if (line_end == std::string::npos) break;
    const std::size_t close = raw.find("```", line_end);
    if (close == std::string::npos) break;
    const auto doc = json::parse(raw.substr(line_end + 1, close - line_end - 1), nullptr, false);
    if (doc.is_object()) return doc;
    pos = close + 3;
  }
  const auto first = raw.find('{');
  const auto last = raw.rfind('}');
  if (first == std::string::npos || last == std::string::npos || last < first) {
    throw PlanParseError("no JSON object in plan text", -1);
  }
  try {
    return json::parse(raw.substr(first, last - first + 1));
  } catch (const json::parse_error& e) {
    throw PlanParseError(std::string("malformed JSON: ") + e.what(), -1);
  }
}

const json& require(const json& obj, const char* key, int stage) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw PlanParseError(std::string("missing field '") + key + "'", stage);
  return *it;
}

std::vector<std::string> names(const json& j, const char* key, int stage) {
  if (!j.is_array()) throw PlanParseError(std::string("'") + key + "' must be a list", stage);
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string() || v.get<std::string>().empty()) {
      throw PlanParseError(std::string("'") + key + "' entries must be names", stage);
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

ShapeProgram shape(const json& j, int stage) {
  try {
    ShapeProgram p = ShapeProgram::from_json(j);
    CompiledShape check(p);
    return p;
  } catch (const InvalidShape& e) {
    throw PlanParseError(std::string("shape program: ") + e.what(), stage);
  } catch (const json::exception& e) {
    throw PlanParseError(std::string("shape program: ") + e.what(), stage);
  }
}

void warn_unknown(const json& obj, const std::set<std::string>& known, const std::string& where,
                  std::vector<std::string>& warnings) {
  for (const auto& [k, v] : obj.items()) {
    if (!known.contains(k)) warnings.push_back(where + ": ignored field '" + k + "'");
  }
}

StagePlan parse_stage(const json& j, int i, std::vector<std::string>& warnings) {
  if (!j.is_object()) throw PlanParseError("stage must be an object", i);
  static const std::set<std::string> known = {"explanation", "tool_name", "shape_program",
                                              "input_vars", "output_vars", "locations",
                                              "volumes"};
  StagePlan s;
  const json& expl = require(j, "explanation", i);
  if (!expl.is_string()) throw PlanParseError("'explanation' must be text", i);
  s.explanation = expl.get<std::string>();
  const json& tool = require(j, "tool_name", i);
  if (!tool.is_string()) throw PlanParseError("'tool_name' must be text", i);
  s.tool_name = tool.get<std::string>();
  try {
    (void)ToolSpec::by_name(s.tool_name);
  } catch (const ConfigError&) {
    throw PlanParseError("unknown tool '" + s.tool_name + "'", i);
  }
  s.shape_program = shape(require(j, "shape_program", i), i);
  s.input_vars = names(require(j, "input_vars", i), "input_vars", i);
  s.output_vars = names(require(j, "output_vars", i), "output_vars", i);
  if (s.output_vars.empty()) throw PlanParseError("stage has no output variables", i);

  const json& loc = require(j, "locations", i);
  if (!loc.is_object()) throw PlanParseError("'locations' must be a dictionary", i);
  for (const auto& [k, v] : loc.items()) {
    if (!v.is_array() || v.size() != 3 ||
        !std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); })) {
      throw PlanParseError("location of '" + k + "' must be [x, y, z]", i);
    }
    s.locations[k] = Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
  }
  const json& vol = require(j, "volumes", i);
  if (!vol.is_object()) throw PlanParseError("'volumes' must be a dictionary", i);
  for (const auto& [k, v] : vol.items()) {
    if (!v.is_number() || !(v.get<double>() > 0.0) || !std::isfinite(v.get<double>())) {
      throw PlanParseError("volume of '" + k + "' must be a positive number", i);
    }
    s.volumes[k] = v.get<double>();
  }
  warn_unknown(j, known, "stage " + std::to_string(i), warnings);
  return s;
}

}  // namespace

PlanResponse parse_plan(const std::string& raw) {
  const json doc = extract_document(raw);
  if (!doc.is_object()) throw PlanParseError("plan must be a JSON object", -1);
  PlanResponse plan;
  plan.raw_text = raw;
  if (auto it = doc.find("task"); it != doc.end()) {
    if (!it->is_string()) throw PlanParseError("'task' must be text", -1);
    plan.task = it->get<std::string>();
  }
  if (auto it = doc.find("initial_var"); it != doc.end()) {
    if (!it->is_string()) throw PlanParseError("'initial_var' must be text", -1);
    plan.initial_var = it->get<std::string>();
  }
  if (auto it = doc.find("initial_shape"); it != doc.end()) {
    plan.initial_shape = shape(*it, -1);
  }
  if (auto it = doc.find("metadata"); it != doc.end()) plan.metadata = *it;
  const auto it = doc.find("stages");
  if (it == doc.end()) throw PlanParseError("missing field 'stages'", -1);
  if (!it->is_array() || it->empty()) throw PlanParseError("'stages' must be a nonempty list", -1);
  for (std::size_t i = 0; i < it->size(); ++i) {
    plan.stages.push_back(parse_stage((*it)[i], static_cast<int>(i), plan.warnings));
  }
  warn_unknown(doc, {"task", "initial_var", "initial_shape", "metadata", "stages"}, "plan",
               plan.warnings);
  return plan;
}

nlohmann::json to_json(const PlanResponse& plan) {
  json doc = {{"task", plan.task}, {"initial_var", plan.initial_var}};
  if (plan.initial_shape) doc["initial_shape"] = plan.initial_shape->to_json();
  json stages = json::array();
  for (const auto& s : plan.stages) {
    json loc = json::object(), vol = json::object();
    for (const auto& [k, v] : s.locations) loc[k] = {v.x(), v.y(), v.z()};
    for (const auto& [k, v] : s.volumes) vol[k] = v;
    stages.push_back({{"explanation", s.explanation},
                      {"tool_name", s.tool_name},
                      {"shape_program", s.shape_program.to_json()},
                      {"input_vars", s.input_vars},
                      {"output_vars", s.output_vars},
                      {"locations", loc},
                      {"volumes", vol}});
  }
  doc["stages"] = stages;
  if (!plan.metadata.empty()) doc["metadata"] = plan.metadata;
  return doc;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kWarn: return "warn";
    case Verdict::kReject: return "reject";
  }
  return "?";
}

ValidationReport validate_plan(const PlanResponse& plan, double initial_volume,
                               const VolumeThresholds& thresholds) {
  if (!(initial_volume > 0.0)) throw DomainError("initial volume must be positive");
  ValidationReport rep;
  std::map<std::string, double> live = {{plan.initial_var, initial_volume}};
  double worst = 0.0;
  double last_program = initial_volume;
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const StagePlan& s = plan.stages[i];
    const std::string tag = "stage " + std::to_string(i);
    StageVolume sv;
    sv.stage = static_cast<int>(i);
    bool inputs_ok = !s.input_vars.empty();
    if (s.input_vars.empty()) rep.flow_errors.push_back(tag + " consumes nothing");
    for (const auto& v : s.input_vars) {
      auto it = live.find(v);
      if (it == live.end()) {
        rep.flow_errors.push_back(tag + " consumes undeclared variable '" + v + "'");
        inputs_ok = false;
        continue;
      }
      sv.input_volume += it->second;
      live.erase(it);
    }
    for (const auto& v : s.output_vars) {
      auto it = s.volumes.find(v);
      if (it == s.volumes.end()) {
        rep.flow_errors.push_back(tag + " declares no volume for output '" + v + "'");
        continue;
      }
      if (live.contains(v)) rep.flow_errors.push_back(tag + " redefines live variable '" + v + "'");
      sv.declared_output += it->second;
      live[v] = it->second;
    }
    sv.program_volume = shape_volume(s.shape_program).value;
    last_program = sv.program_volume;
    if (inputs_ok) {
      sv.change = relative_volume_change(sv.input_volume, sv.program_volume);
      worst = std::max(worst, sv.change);
    }
    if (sv.declared_output > 0.0 &&
        relative_volume_change(sv.declared_output, sv.program_volume) > thresholds.warn) {
      rep.messages.push_back(tag + ": declared output volume differs from the shape volume");
    }
    rep.stages.push_back(sv);
  }
  rep.end_to_end_change = relative_volume_change(initial_volume, last_program);
  worst = std::max(worst, rep.end_to_end_change);
  rep.flow_ok = rep.flow_errors.empty();

  if (!rep.flow_ok || worst > thresholds.reject) {
    rep.verdict = Verdict::kReject;
  } else if (worst > thresholds.warn) {
    rep.verdict = Verdict::kWarn;
  }
  if (worst > thresholds.warn) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << "volume change " << 100.0 * worst
       << "% exceeds the "
       << 100.0 * (worst > thresholds.reject ? thresholds.reject : thresholds.warn) << "% limit";
    rep.messages.push_back(os.str());
  }
  return rep;
}

nlohmann::json to_json(const ValidationReport& r) {
  json stages = json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"stage", s.stage},
                      {"input_volume", s.input_volume},
                      {"declared_output_volume", s.declared_output},
                      {"program_volume", s.program_volume},
                      {"relative_change", s.change}});
  }
  return {{"verdict", to_string(r.verdict)},
          {"end_to_end_change", r.end_to_end_change},
          {"flow_ok", r.flow_ok},
          {"flow_errors", r.flow_errors},
          {"messages", r.messages},
          {"stages", stages}};
}

std::vector<PointCloud> compile_subgoals(const PlanResponse& plan, std::size_t n_points,
                                         std::uint64_t seed, int dim) {
  if (dim != 2 && dim != 3) throw ConfigError("dim must be 2 or 3");
  std::vector<PointCloud> out;
  out.reserve(plan.stages.size());
  for (std::size_t k = 0; k < plan.stages.size(); ++k) {
    const auto& prog = plan.stages[k].shape_program;
    out.push_back(dim == 2 ? sample_shape_slice(prog, n_points, seed + k)
                           : sample_shape(prog, n_points, seed + k));
  }
  return out;
}

}  // namespace dough
