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

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dough/geometry/point_cloud.hpp"
#include "dough/geometry/sdf.hpp"

namespace dough {

struct MaterialParams {
  double youngs_modulus = 2.0e4;  // Pa
  double poisson_ratio = 0.3;
  double yield_stress = 1.5e3;  // Pa
  double density = 1.0e3;       // kg/m^3

  double mu() const { return youngs_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double lambda() const {
    return youngs_modulus * poisson_ratio /
           ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
};

enum class GradientMode { kAdjoint, kFiniteDifference };

/// Simulation settings. The domain is the cube [0, domain]^3 (square in 2-D
/// mode, where everything lives in the z = 0 plane and y points up).
struct SimConfig {
  int dim = 2;
  int grid_res = 32;
  double domain = 1.0;      // m
  double dt = 1.0e-3;       // s
  int substeps = 10;        // per action step
  MaterialParams material;
  double gravity = 9.81;    // m/s^2 along -y
  double ground_friction = 0.5;
  int boundary_cells = 3;   // walls and ground sit this many cells in
  double contact_layer_cells = 1.0;  // tool influence band width
  double max_speed = 0.5;   // action bound for translation rates, m/s
  GradientMode gradient = GradientMode::kAdjoint;
  double fd_step = 1e-4;

  double dx() const { return domain / grid_res; }
  double ground_height() const { return boundary_cells * dx(); }
  double step_duration() const { return dt * substeps; }
  /// Throws ConfigError for unsupported dimension, resolution < 16, or a
  /// timestep violating the elastic wave CFL bound.
  void validate() const;
};

/// Particle state. 2-D mode keeps z components at zero and F/C block
/// diagonal with a unit zz entry.
struct SimState {
  std::vector<Vec3> x;  // m
  std::vector<Vec3> v;  // m/s
  std::vector<Mat3> F;  // elastic deformation gradient
  std::vector<Mat3> C;  // affine velocity field
  std::vector<double> plastic_strain;  // accumulated
  double particle_mass = 0.0;    // kg
  double particle_volume = 0.0;  // m^3 (m^2 in 2-D)
  double time = 0.0;

  std::size_t size() const { return x.size(); }
  PointCloud positions() const { return PointCloud(x); }
  double total_mass() const { return particle_mass * static_cast<double>(x.size()); }
  double kinetic_energy() const;
};

/// Rest state from a cloud. Particle volume defaults to the cell-quarter
/// convention (dx/2)^dim.
SimState make_state(const PointCloud& cloud, const SimConfig& cfg,
                    double particle_volume = 0.0);

enum class ToolKind { kRollingPin, kKnife, kGripper, kPole };

/// Rigid kinematic tool. Action rows are [vx, vy, vz] plus the roll rate
/// about the pin axis (rad/s) or the gripper opening rate (m/s).
struct ToolSpec {
  std::string name;
  ToolKind kind = ToolKind::kRollingPin;
  SdfPrimitive geometry;
  double friction = 0.5;

  int dof() const;
  /// Per-component action bounds for a translation speed bound.
  Eigen::VectorXd action_bounds(double max_speed) const;
  void validate() const;

  static ToolSpec rolling_pin(double radius, double half_length);
  static ToolSpec knife(const Vec3& half_extents);
  static ToolSpec gripper(const Vec3& plate_half_extents);
  static ToolSpec pole(double radius, double half_height);
  /// Lookup by catalog name (rolling_pin, knife, gripper, pole); ConfigError
  /// when unknown.
  static ToolSpec by_name(const std::string& name);
};

struct ToolPose {
  Vec3 position = Vec3::Zero();
  double angle = 0.0;    // accumulated roll, rad
  double opening = 0.0;  // gripper inner gap, m
};

/// Signed distance of a world point to the tool at a pose.
double tool_distance(const ToolSpec& tool, const ToolPose& pose, const Vec3& p);

/// L x dof action matrix.
struct ActionSequence {
  Eigen::MatrixXd values;

  ActionSequence() = default;
  ActionSequence(int steps, int dof) : values(Eigen::MatrixXd::Zero(steps, dof)) {}
  explicit ActionSequence(Eigen::MatrixXd v) : values(std::move(v)) {}

  int steps() const { return static_cast<int>(values.rows()); }
  int dof() const { return static_cast<int>(values.cols()); }
  /// Throws DomainError when the shape mismatches the tool or a component
  /// exceeds its bound (with a small slack for rounding).
  void validate(const ToolSpec& tool, double max_speed) const;
  /// Clamp every component into its bound.
  void project(const ToolSpec& tool, double max_speed);
};

/// Pose after integrating one action row over `duration` seconds.
ToolPose advance_pose(const ToolSpec& tool, const ToolPose& pose,
                      const Eigen::VectorXd& action, double duration, int dim);

struct RolloutResult {
  SimState state;
  ToolPose pose;
  std::vector<PointCloud> trajectory;  // particles after each action step
};

/// Deterministic MLS-MPM integration of the action sequence. Throws
/// SimulationDiverged with the action step index on non-finite values,
/// inverted elements or particles leaving the grid.
RolloutResult rollout(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                      const ActionSequence& actions, const SimConfig& cfg);

/// One PLY per trajectory entry, named step_0000.ply, ...
void dump_trajectory(const std::vector<PointCloud>& trajectory,
                     const std::filesystem::path& dir);

}  // namespace dough
