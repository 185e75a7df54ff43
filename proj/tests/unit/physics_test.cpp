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


#include <gtest/gtest.h>

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "dough/errors.hpp"
#include "dough/eval/gradcheck.hpp"
#include "dough/geometry/ply.hpp"
#include "dough/geometry/shape_program.hpp"
#include "dough/physics/loss.hpp"

using namespace dough;

namespace {

SimConfig planar(double gravity = 9.81) {
  SimConfig cfg;
  cfg.dim = 2;
  cfg.gravity = gravity;
  return cfg;
}

// Disc of dough sitting on the ground in the z = 0 plane.
SimState dough_ball(const SimConfig& cfg, std::size_t n = 120, std::uint64_t seed = 1,
                    double radius = 0.08) {
  const Vec3 c(0.5, cfg.ground_height() + radius, 0.0);
  return make_state(sample_shape_slice(ShapeProgram(Sphere{c, radius}), n, seed), cfg);
}

double max_height(const SimState& s) {
  double h = -INFINITY;
  for (const auto& p : s.x) h = std::max(h, p.y());
  return h;
}

ToolPose far_pose() {
  ToolPose p;
  p.position = Vec3(0.5, 0.85, 0.0);
  return p;
}

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

double adjoint_vs_fd(const SimState& s0, const ToolSpec& tool, const ToolPose& pose,
                     const ActionSequence& a, const PointCloud& cand, SimConfig cfg) {
  cfg.gradient = GradientMode::kAdjoint;
  const auto ga = grad_actions(s0, tool, pose, a, cand, cfg);
  cfg.gradient = GradientMode::kFiniteDifference;
  const auto gf = grad_actions(s0, tool, pose, a, cand, cfg);
  EXPECT_DOUBLE_EQ(ga.loss, gf.loss);
  return rel_error(ga.grad, gf.grad);
}

PointCloud jitter(const SimState& s, std::uint64_t seed, double sigma, bool planar_only) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<Vec3> out;
  for (const auto& p : s.x) out.push_back(p + Vec3(n(rng), n(rng), planar_only ? 0.0 : n(rng)));
  return PointCloud(std::move(out));
}

}  // namespace

TEST(Rollout, EquilibriumWithoutGravity) {
  const SimConfig cfg = planar(0.0);
  const SimState s0 = dough_ball(cfg);
  const auto tool = ToolSpec::by_name("rolling_pin");
  const auto r = rollout(s0, tool, far_pose(), ActionSequence(8, tool.dof()), cfg);
  for (std::size_t i = 0; i < s0.size(); ++i) EXPECT_LE((r.state.x[i] - s0.x[i]).norm(), 1e-9);
  EXPECT_EQ(r.trajectory.size(), 8u);
  EXPECT_NEAR(r.state.time, 8 * cfg.step_duration(), 1e-12);
}

TEST(Rollout, PressingLowersTheDough) {
  const SimConfig cfg = planar();
  const SimState s0 = dough_ball(cfg);
  const auto tool = ToolSpec::by_name("rolling_pin");
  ToolPose pose;
  pose.position = Vec3(0.5, max_height(s0) + 0.05 + 0.005, 0.0);
  ActionSequence a(15, tool.dof());
  a.values.col(1).setConstant(-0.3);
  const auto r = rollout(s0, tool, pose, a, cfg);
  EXPECT_LT(max_height(r.state), max_height(s0) - 0.02);
  double plastic = 0.0;
  for (std::size_t i = 0; i < r.state.size(); ++i) {
    EXPECT_GT(r.state.F[i].determinant(), 0.0);
    EXPECT_EQ(r.state.x[i].z(), 0.0);
    plastic = std::max(plastic, r.state.plastic_strain[i]);
  }
  EXPECT_GT(plastic, 0.0);
}

TEST(Rollout, ConservesParticlesAndMass) {
  const SimConfig cfg = planar();
  const char* names[] = {"rolling_pin", "knife", "gripper", "pole"};
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const SimState s0 = dough_ball(cfg, 60, trial);
    const auto tool = ToolSpec::by_name(names[trial % 4]);
    ToolPose pose;
    pose.position = Vec3(0.5 + 0.1 * u(rng), 0.3 + 0.1 * u(rng), 0.0);
    pose.opening = tool.kind == ToolKind::kGripper ? 0.2 : 0.0;
    ActionSequence a(4, tool.dof());
    const Eigen::VectorXd b = tool.action_bounds(cfg.max_speed);
    for (int t = 0; t < a.steps(); ++t) {
      for (int k = 0; k < a.dof(); ++k) a.values(t, k) = b[k] * u(rng);
    }
    const auto r = rollout(s0, tool, pose, a, cfg);
    ASSERT_EQ(r.state.size(), s0.size());
    EXPECT_EQ(r.state.total_mass(), s0.total_mass());
    for (const auto& pc : r.trajectory) ASSERT_EQ(pc.size(), s0.size());
    for (std::size_t i = 0; i < r.state.size(); ++i) {
      ASSERT_TRUE(r.state.x[i].allFinite() && r.state.v[i].allFinite() &&
                  r.state.F[i].allFinite());
    }
  }
}

TEST(Rollout, BitwiseDeterministic) {
  const SimConfig cfg = planar();
  const PhysicsToy toy = make_physics_toy(3, cfg);
  const auto a = rollout(toy.s0, toy.tool, toy.pose, toy.actions, cfg);
  const auto b = rollout(toy.s0, toy.tool, toy.pose, toy.actions, cfg);
  for (std::size_t i = 0; i < a.state.size(); ++i) {
    EXPECT_EQ(a.state.x[i], b.state.x[i]);
    EXPECT_EQ(a.state.v[i], b.state.v[i]);
    EXPECT_EQ(a.state.F[i], b.state.F[i]);
  }
}

TEST(Rollout, StaysAboveGround) {
  const SimConfig cfg = planar();
  SimState s0 = dough_ball(cfg, 150, 5);
  // Drop from 15 cm while the pin drives down at full speed.
  for (auto& p : s0.x) p.y() += 0.15;
  for (auto& v : s0.v) v = Vec3(0.0, -1.0, 0.0);
  const auto tool = ToolSpec::by_name("rolling_pin");
  ToolPose pose;
  pose.position = Vec3(0.48, max_height(s0) + 0.06, 0.0);
  ActionSequence a(40, tool.dof());
  a.values.col(1).setConstant(-cfg.max_speed);
  const auto r = rollout(s0, tool, pose, a, cfg);
  for (const auto& pc : r.trajectory) {
    for (const auto& p : pc) EXPECT_GE(p.y(), cfg.ground_height() - cfg.dx());
  }
}

TEST(Rollout, KineticEnergyNonIncreasingWhenPassive) {
  const SimConfig cfg = planar(0.0);
  const auto tool = ToolSpec::by_name("pole");
  // At rest, and drifting as a rigid body.
  for (const Vec3 drift : {Vec3(0, 0, 0), Vec3(0.2, 0.1, 0.0)}) {
    SimState s = dough_ball(cfg);
    for (auto& p : s.x) p.y() += 0.1;
    for (auto& v : s.v) v = drift;
    double prev = s.kinetic_energy();
    for (int step = 0; step < 10; ++step) {
      s = rollout(s, tool, far_pose(), ActionSequence(1, tool.dof()), cfg).state;
      const double ke = s.kinetic_energy();
      EXPECT_LE(ke, prev * (1.0 + 1e-12) + 1e-15) << "step " << step;
      prev = ke;
    }
  }
}

TEST(Rollout, ThreeDimensionalPress) {
  SimConfig cfg;
  cfg.dim = 3;
  cfg.grid_res = 24;
  const double r = 0.08;
  const Vec3 c(0.5, cfg.ground_height() + r, 0.5);
  const SimState s0 = make_state(sample_shape(ShapeProgram(Sphere{c, r}), 300, 2), cfg);
  const auto tool = ToolSpec::by_name("pole");
  ToolPose pose;
  pose.position = Vec3(0.5, max_height(s0) + 0.12 + 0.005, 0.5);
  ActionSequence a(10, tool.dof());
  a.values.col(1).setConstant(-0.4);
  const auto out = rollout(s0, tool, pose, a, cfg);
  EXPECT_LT(max_height(out.state), max_height(s0) - 0.01);
  EXPECT_EQ(out.state.total_mass(), s0.total_mass());
}

TEST(Rollout, Errors) {
  SimConfig cfg = planar();
  const SimState s0 = dough_ball(cfg);
  const auto tool = ToolSpec::by_name("rolling_pin");

  ActionSequence fast(2, 4);
  fast.values(0, 0) = 2.0 * cfg.max_speed;
  EXPECT_THROW(rollout(s0, tool, far_pose(), fast, cfg), DomainError);
  EXPECT_THROW(rollout(s0, tool, far_pose(), ActionSequence(2, 3), cfg), DomainError);

  SimState outside = s0;
  outside.x[0] = Vec3(-0.5, 0.5, 0.0);
  try {
    rollout(outside, tool, far_pose(), ActionSequence(2, 4), cfg);
    FAIL() << "expected SimulationDiverged";
  } catch (const SimulationDiverged& e) {
    EXPECT_EQ(e.step(), 0u);
  }
  SimState nan_state = s0;
  nan_state.v[3].x() = NAN;
  EXPECT_THROW(rollout(nan_state, tool, far_pose(), ActionSequence(2, 4), cfg),
               SimulationDiverged);

  SimConfig bad = cfg;
  bad.grid_res = 8;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.dt = 0.05;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = cfg;
  bad.dim = 4;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(ToolSpec::by_name("spatula"), ConfigError);
}

TEST(Tools, CatalogAndBounds) {
  EXPECT_EQ(ToolSpec::by_name("rolling_pin").dof(), 4);
  EXPECT_EQ(ToolSpec::by_name("gripper").dof(), 4);
  EXPECT_EQ(ToolSpec::by_name("knife").dof(), 3);
  EXPECT_EQ(ToolSpec::by_name("pole").dof(), 3);
  const auto pin = ToolSpec::by_name("rolling_pin");
  ActionSequence a(3, 4);
  a.values.setConstant(100.0);
  a.project(pin, 0.5);
  EXPECT_NO_THROW(a.validate(pin, 0.5));
  EXPECT_DOUBLE_EQ(a.values(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(a.values(0, 3), 0.5 / pin.geometry.radius);

  ToolPose pose;
  pose.position = Vec3(0, 1.05, 0);
  EXPECT_NEAR(tool_distance(pin, pose, Vec3::Zero()), 1.0, 1e-12);
  Eigen::VectorXd row(4);
  row << 0.1, -0.2, 0.3, 1.0;
  const ToolPose next = advance_pose(pin, pose, row, 0.5, 2);
  EXPECT_NEAR((next.position - Vec3(0.05, 0.95, 0.0)).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(next.angle, 0.5);
}

TEST(Loss, PointToPoint) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> a, b;
  for (int i = 0; i < 50; ++i) {
    a.emplace_back(u(rng), u(rng), u(rng));
    b.emplace_back(u(rng), u(rng), u(rng));
  }
  EXPECT_EQ(loss_p2p(PointCloud(a), PointCloud(a)), 0.0);
  std::vector<Vec3> shifted = a;
  shifted[7] += Vec3(1, 2, 3);
  EXPECT_DOUBLE_EQ(loss_p2p(PointCloud(shifted), PointCloud(a)), 6.0);
  double naive = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int k = 0; k < 3; ++k) naive += std::fabs(a[i][k] - b[i][k]);
  }
  EXPECT_EQ(loss_p2p(PointCloud(a), PointCloud(b)), naive);
  a.pop_back();
  EXPECT_THROW(loss_p2p(PointCloud(a), PointCloud(b)), DomainError);
}

TEST(Loss, Composite) {
  const auto pin = ToolSpec::by_name("rolling_pin");
  std::vector<Vec3> line;
  for (int i = 0; i < 9; ++i) line.emplace_back(0.0, 0.0, -0.2 + 0.05 * i);
  const PointCloud pc(line);
  const ActionSequence still(5, 4);

  ToolPose touching;
  touching.position = Vec3(0.0, 0.05, 0.0);
  EXPECT_NEAR(composite_loss(pc, pc, pin, touching, still), 0.0, 1e-12);
  ToolPose away;
  away.position = Vec3(0.0, 1.05, 0.0);
  EXPECT_NEAR(composite_loss(pc, pc, pin, away, still), 1.0, 1e-12);

  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> other;
  for (const auto& p : line) other.push_back(p + Vec3(u(rng), u(rng), u(rng)));
  ActionSequence moving(5, 4);
  moving.values.setRandom();
  ToolPose pose;
  pose.position = Vec3(0.3, 0.4, 0.1);
  const LossWeights w{0.7, 1.3, 0.05};
  double min_sdf = INFINITY;
  for (const auto& p : other) min_sdf = std::min(min_sdf, tool_distance(pin, pose, p));
  double vel = 0.0;
  for (int t = 0; t < 5; ++t) vel += moving.values.row(t).squaredNorm() / 5.0;
  const double want = 0.7 * loss_p2p(PointCloud(other), pc) + 1.3 * std::max(min_sdf, 0.0) +
                      0.05 * vel;
  EXPECT_NEAR(composite_loss(PointCloud(other), pc, pin, pose, moving, w), want, 1e-12);
}

TEST(Gradient, ZeroOutOfContact) {
  const SimConfig cfg = planar();
  const SimState s0 = dough_ball(cfg);
  const auto tool = ToolSpec::by_name("rolling_pin");
  ToolPose pose;
  pose.position = Vec3(0.5, 0.7, 0.0);
  ActionSequence a(5, 4);
  a.values.col(0).setConstant(0.2);
  a.values.col(3).setConstant(3.0);
  const PointCloud final_state = rollout(s0, tool, pose, a, cfg).state.positions();
  const auto g = grad_actions(s0, tool, pose, a, final_state, cfg, LossWeights{1.0, 0.0, 0.0});
  EXPECT_NEAR(g.loss, 0.0, 1e-15);
  EXPECT_LE(g.grad.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Gradient, MatchesFiniteDifferencesOnToy) {
  const auto rep = physics_gradcheck(GradcheckOptions{});
  ASSERT_EQ(rep.cases.size(), 10u);
  for (const auto& c : rep.cases) {
    EXPECT_TRUE(std::isfinite(c.relative_error)) << "seed " << c.seed;
  }
  EXPECT_GE(rep.passed(), 9);
}

TEST(Gradient, OtherToolsMatchFiniteDifferences) {
  const SimConfig cfg = planar();
  const SimState s0 = dough_ball(cfg, 100, 3);
  const double top = max_height(s0);

  const auto knife = ToolSpec::by_name("knife");
  ToolPose kp;
  kp.position = Vec3(0.52, top + 0.12 + 0.004, 0.0);
  ActionSequence ka(4, 3);
  ka.values << 0.05, -0.4, 0, -0.05, -0.45, 0, 0.0, -0.3, 0, 0.1, -0.35, 0;
  EXPECT_LE(adjoint_vs_fd(s0, knife, kp, ka, jitter(s0, 1, 0.01, true), cfg), 0.05);

  const auto gripper = ToolSpec::by_name("gripper");
  ToolPose gp;
  gp.position = Vec3(0.5, cfg.ground_height() + 0.09, 0.0);
  gp.opening = 0.18;
  ActionSequence ga(4, 4);
  ga.values << 0.02, 0, 0, -0.4, -0.03, 0, 0, -0.45, 0.0, 0.05, 0, -0.3, 0.04, 0, 0, -0.4;
  EXPECT_LE(adjoint_vs_fd(s0, gripper, gp, ga, jitter(s0, 2, 0.01, true), cfg), 0.05);
}

TEST(Gradient, ThreeDimensionalMatchesFiniteDifferences) {
  SimConfig cfg;
  cfg.dim = 3;
  cfg.grid_res = 20;
  const PhysicsToy toy = make_physics_toy(4, cfg, 200, 3);
  EXPECT_LE(adjoint_vs_fd(toy.s0, toy.tool, toy.pose, toy.actions, toy.candidate, cfg), 0.05);
}

TEST(Gradient, DescentReducesLoss) {
  const SimConfig cfg = planar();
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PhysicsToy toy = make_physics_toy(seed, cfg);
    ActionSequence a = toy.actions;
    const double before =
        grad_actions(toy.s0, toy.tool, toy.pose, a, toy.candidate, cfg).loss;
    double after = before;
    for (int it = 0; it < 10; ++it) {
      const auto g = grad_actions(toy.s0, toy.tool, toy.pose, a, toy.candidate, cfg);
      after = g.loss;
      const double scale = g.grad.cwiseAbs().maxCoeff();
      if (scale == 0.0) break;
      a.values -= (0.02 * cfg.max_speed / scale) * g.grad;
      a.project(toy.tool, cfg.max_speed);
    }
    after = composite_loss(rollout(toy.s0, toy.tool, toy.pose, a, cfg).state.positions(),
                           toy.candidate, toy.tool,
                           rollout(toy.s0, toy.tool, toy.pose, a, cfg).pose, a);
    improved += after < before ? 1 : 0;
  }
  EXPECT_GE(improved, 9);
}

TEST(Gradient, BrokenComponentIsReported) {
  GradcheckOptions opt;
  opt.instances = 2;
  opt.break_component = 6;
  const auto rep = physics_gradcheck(opt);
  EXPECT_FALSE(rep.pass());
  for (const auto& c : rep.cases) EXPECT_EQ(c.worst_component, 6);
}

TEST(Trajectory, DumpWritesOnePlyPerStep) {
  const SimConfig cfg = planar();
  const PhysicsToy toy = make_physics_toy(0, cfg, 40, 3);
  const auto r = rollout(toy.s0, toy.tool, toy.pose, toy.actions, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "dough_traj_test";
  std::filesystem::remove_all(dir);
  dump_trajectory(r.trajectory, dir);
  for (int i = 0; i < 3; ++i) {
    const auto pc = read_ply(dir / ("step_000" + std::to_string(i) + ".ply"));
    ASSERT_EQ(pc.size(), 40u);
    EXPECT_LE((pc[5] - r.trajectory[i][5]).norm(), 1e-6);
  }
  std::filesystem::remove_all(dir);
}
