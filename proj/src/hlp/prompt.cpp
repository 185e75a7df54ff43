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
#include <sstream>

#include "dough/hlp/hlp.hpp"
#include "dough/physics/sim.hpp"

namespace dough {

namespace {

struct ToolBlurb {
  const char* name;
  const char* text;
};

constexpr ToolBlurb kTools[] = {
    {"rolling_pin",
     "a horizontal capsule (radius 5 cm, length 60 cm) along the z axis. It rolls and "
     "presses to flatten or spread dough into sheets. Actions: linear velocity "
     "(vx, vy, vz) and spin rate."},
    {"knife",
     "a thin vertical blade (1.2 cm thick, 24 cm tall, 60 cm wide in z). Moving it down "
     "through the dough splits one piece into two. Actions: linear velocity (vx, vy, vz)."},
    {"gripper",
     "two parallel plates facing each other along x. Closing them squeezes dough, and "
     "moving while closed carries it to a new place. Actions: linear velocity and "
     "opening rate."},
    {"pole",
     "a vertical cylinder (radius 3 cm). Pushing it down through a flat piece makes a "
     "hole. Actions: linear velocity (vx, vy, vz)."},
};

const ToolBlurb* find_tool(const std::string& name) {
  for (const auto& t : kTools) {
    if (name == t.name) return &t;
  }
  return nullptr;
}

constexpr const char* kGrammar = R"({"dsl_version": 1, "shape": NODE}
NODE := {"type": "sphere",    "center": [x,y,z], "radius": r}
      | {"type": "box",       "center": [x,y,z], "half_extents": [hx,hy,hz]}
      | {"type": "cylinder",  "center": [x,y,z], "radius": r, "height": h, "axis": [ax,ay,az]}
      | {"type": "torus",     "center": [x,y,z], "major_radius": R, "minor_radius": r, "axis": [ax,ay,az]}
      | {"type": "ellipsoid", "center": [x,y,z], "radii": [rx,ry,rz]}
      | {"type": "union",     "children": [NODE, ...]}
      | {"type": "translate", "offset": [x,y,z], "child": NODE}
      | {"type": "rotate",    "axis": [ax,ay,az], "angle_deg": a, "child": NODE})";

constexpr const char* kSchemaBullets[] = {
    "\"explanation\": a one-line explanation of what this step is doing.",
    "\"tool_name\": the name of the tool to be used.",
    "\"shape_program\": a shape program (grammar above) generating the target of this "
    "stage. Remember to use absolute world locations when building complex shapes.",
    "\"input_vars\" and \"output_vars\": the variable names for the input and output pieces.",
    "\"locations\": the location of each piece in a dictionary with the variable name as "
    "the key, e.g. {\"flat\": [0.0, 0.03, 0.0]}.",
    "\"volumes\": the volume of each piece in a dictionary with the variable name as the "
    "key, in cubic meters.",
};

}  // namespace

std::vector<std::string> default_tool_catalog() {
  std::vector<std::string> out;
  for (const auto& t : kTools) out.emplace_back(t.name);
  return out;
}

std::vector<std::string> default_guidelines() {
  return {
      "Use exactly one tool per stage.",
      "Keep every piece resting on the table: its lowest point should be at y = 0.",
      "Prefer few stages. Each stage should be reachable from the previous one with its tool.",
      "Pieces that must stay separate should not touch in the final shape.",
  };
}

std::string build_prompt(const std::string& task_text, const std::vector<std::string>& tools,
                         const std::vector<std::string>& guidelines) {
  if (task_text.empty()) throw ConfigError("task text is empty");
  std::ostringstream p;
  p << "You are planning how a robot manipulates a piece of dough on a table, one tool "
       "at a time.\n\n"
    << "Task: " << task_text << "\n\n"
    << "World frame: meters, y points up, the table top is the plane y = 0 and the dough "
       "starts centred above the origin. The input dough is called \"dough\".\n\n"
    << "Available tools:\n";
  for (const auto& name : tools) {
    const ToolBlurb* t = find_tool(name);
    if (t == nullptr) throw ConfigError("unknown tool '" + name + "' in catalog");
    p << "- " << t->name << ": " << t->text << "\n";
  }
  p << "\nShape grammar. Shapes are JSON documents:\n" << kGrammar << "\n\n"
    << "Rules:\n"
    << "- Stages must be volume-preserving: the total volume of the output pieces of each "
       "stage must equal the total volume of its input pieces. Dough is incompressible.\n";
  for (const auto& g : guidelines) p << "- " << g << "\n";
  p << "\nThink step by step before answering. For every stage first write down the "
       "volume of the input pieces, then choose the shape parameters, then compute the "
       "volume of each output piece from its dimensions and check it matches the input "
       "volume. Adjust the dimensions until it does.\n\n"
    << "For each stage output:\n";
  for (const char* b : kSchemaBullets) p << "- " << b << "\n";
  p << "\nFinish with a single ```json fenced block holding "
       "{\"task\": ..., \"stages\": [STAGE, ...]} where each STAGE has the fields above. "
       "Do not write executable code.\n";
  return p.str();
}

}  // namespace dough
