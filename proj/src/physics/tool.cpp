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
#include <sstream>

#include "dough/errors.hpp"
#include "dough/geometry/ply.hpp"
#include "dough/physics/sim.hpp"

namespace dough {

void SimConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("sim dim must be 2 or 3");
  if (grid_res < 16) throw ConfigError("grid resolution must be >= 16");
  if (!(domain > 0.0) || !(dt > 0.0) || substeps < 1) {
    throw ConfigError("domain, dt and substeps must be positive");
  }
  if (boundary_cells < 1 || 2 * boundary_cells + 4 > grid_res) {
    throw ConfigError("boundary_cells out of range");
  }
  const auto& m = material;
  if (!(m.youngs_modulus > 0.0) || !(m.density > 0.0) || !(m.yield_stress > 0.0) ||
      !(m.poisson_ratio >= 0.0 && m.poisson_ratio < 0.5)) {
    throw ConfigError("invalid material parameters");
  }
  // P-wave speed; explicit MPM needs dt well under dx / c.
  const double c = std::sqrt((m.lambda() + 2.0 * m.mu()) / m.density);
  if (dt > 0.5 * dx() / c) {
    std::ostringstream os;
    os << "dt " << dt << " violates CFL bound " << 0.5 * dx() / c;
    throw ConfigError(os.str());
  }
  if (!(max_speed > 0.0) || !(fd_step > 0.0) || !(contact_layer_cells > 0.0)) {
    throw ConfigError("max_speed, fd_step and contact layer must be positive");
  }
  if (!(ground_friction >= 0.0)) throw ConfigError("ground friction must be >= 0");
}

double SimState::kinetic_energy() const {
  double e = 0.0;
  for (const auto& vi : v) e += 0.5 * particle_mass * vi.squaredNorm();
  return e;
}

SimState make_state(const PointCloud& cloud, const SimConfig& cfg, double particle_volume) {
  cfg.validate();
  SimState s;
  const std::size_t n = cloud.size();
  s.x.assign(cloud.begin(), cloud.end());
  if (cfg.dim == 2) {
    for (auto& p : s.x) p.z() = 0.0;
  }
  s.v.assign(n, Vec3::Zero());
  s.F.assign(n, Mat3::Identity());
  s.C.assign(n, Mat3::Zero());
  s.plastic_strain.assign(n, 0.0);
  s.particle_volume =
      particle_volume > 0.0 ? particle_volume : std::pow(0.5 * cfg.dx(), cfg.dim);
  s.particle_mass = cfg.material.density * s.particle_volume;
  return s;
}

int ToolSpec::dof() const {
  return kind == ToolKind::kRollingPin || kind == ToolKind::kGripper ? 4 : 3;
}

Eigen::VectorXd ToolSpec::action_bounds(double max_speed) const {
  Eigen::VectorXd b = Eigen::VectorXd::Constant(dof(), max_speed);
  // Rolling without slip needs omega = v / r.
  if (kind == ToolKind::kRollingPin) b[3] = max_speed / geometry.radius;
  return b;
}

void ToolSpec::validate() const {
  geometry.validate();
  if (!(friction >= 0.0)) throw DomainError("tool friction must be >= 0");
}

ToolSpec ToolSpec::rolling_pin(double radius, double half_length) {
  return {"rolling_pin", ToolKind::kRollingPin, SdfPrimitive::capsule(radius, half_length), 0.5};
}

ToolSpec ToolSpec::knife(const Vec3& half_extents) {
  // Rounded edge so a descending blade parts the material sideways.
  return {"knife", ToolKind::kKnife, SdfPrimitive::box(half_extents, half_extents.minCoeff()),
          0.1};
}

ToolSpec ToolSpec::gripper(const Vec3& plate_half_extents) {
  return {"gripper", ToolKind::kGripper, SdfPrimitive::plate_pair(plate_half_extents, 0.0), 0.8};
}

ToolSpec ToolSpec::pole(double radius, double half_height) {
  return {"pole", ToolKind::kPole, SdfPrimitive::cylinder(radius, half_height), 0.3};
}

ToolSpec ToolSpec::by_name(const std::string& name) {
  if (name == "rolling_pin") return rolling_pin(0.05, 0.3);
  if (name == "knife") return knife(Vec3(0.006, 0.12, 0.3));
  if (name == "gripper") return gripper(Vec3(0.02, 0.08, 0.2));
  if (name == "pole") return pole(0.03, 0.12);
  throw ConfigError("unknown tool '" + name + "'");
}

double tool_distance(const ToolSpec& tool, const ToolPose& pose, const Vec3& p) {
  const Mat3& r = tool.geometry.rotation;
  const Vec3 local = r.transpose() * (p - pose.position);
  return tool.geometry.local<double>(local, pose.opening).distance;
}

void ActionSequence::validate(const ToolSpec& tool, double max_speed) const {
  if (dof() != tool.dof()) throw DomainError("action dof does not match tool");
  if (steps() < 1) throw DomainError("action sequence is empty");
  if (!values.allFinite()) throw DomainError("actions must be finite");
  const Eigen::VectorXd b = tool.action_bounds(max_speed);
  for (int t = 0; t < steps(); ++t) {
    for (int k = 0; k < dof(); ++k) {
      if (std::abs(values(t, k)) > b[k] * (1.0 + 1e-9)) {
        throw DomainError("action component exceeds bound");
      }
    }
  }
}

void ActionSequence::project(const ToolSpec& tool, double max_speed) {
  const Eigen::VectorXd b = tool.action_bounds(max_speed);
  for (int t = 0; t < steps(); ++t) {
    for (int k = 0; k < dof(); ++k) values(t, k) = std::clamp(values(t, k), -b[k], b[k]);
  }
}

ToolPose advance_pose(const ToolSpec& tool, const ToolPose& pose,
                      const Eigen::VectorXd& action, double duration, int dim) {
  ToolPose out = pose;
  Vec3 u = action.head<3>();
  if (dim == 2) u.z() = 0.0;
  out.position += duration * u;
  if (tool.kind == ToolKind::kRollingPin) out.angle += duration * action[3];
  if (tool.kind == ToolKind::kGripper) out.opening += duration * action[3];
  return out;
}

void dump_trajectory(const std::vector<PointCloud>& trajectory,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    std::ostringstream name;
    name << "step_" << std::setw(4) << std::setfill('0') << i << ".ply";
    write_ply(dir / name.str(), trajectory[i]);
  }
}

}  // namespace dough
