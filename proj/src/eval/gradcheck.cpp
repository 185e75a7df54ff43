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


#include "dough/eval/gradcheck.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "dough/errors.hpp"
#include "dough/geometry/shape_program.hpp"

namespace dough {

int GradcheckReport::passed() const {
  int n = 0;
  for (const auto& c : cases) n += c.pass ? 1 : 0;
  return n;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Push one component far off so the comparison must flag it.
void corrupt(Eigen::Ref<Eigen::VectorXd> g, int k) {
  if (k < 0) return;
  if (k >= g.size()) throw ConfigError("broken component index out of range");
  g[k] += 1.0 + 10.0 * g.cwiseAbs().maxCoeff();
}

int worst_index(const Eigen::VectorXd& diff) {
  Eigen::Index i = 0;
  diff.cwiseAbs().maxCoeff(&i);
  return static_cast<int>(i);
}

}  // namespace

GradcheckReport transport_gradcheck(const GradcheckOptions& opt, double blur_fraction) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport rep;
  rep.module = "transport";
  rep.tolerance = 1e-3;
  const int n = opt.instances > 0 ? opt.instances : 20;
  rep.required = n;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto cloud = [&] {
    std::vector<Vec3> pts;
    for (int i = 0; i < 8; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    return PointCloud(std::move(pts));
  };
  for (int trial = 0; trial < n; ++trial) {
    const PointCloud x = cloud(), y = cloud();
    const auto sp = SinkhornParams::for_clouds(x, y, blur_fraction);
    const double h = 1e-4 * combined_diagonal(x, y);
    const auto g = emd_gradient(x, y, sp);
    Eigen::VectorXd analytic(3 * x.size()), fd(3 * x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        std::vector<Vec3> plus(x.begin(), x.end()), minus(x.begin(), x.end());
        plus[i][a] += h;
        minus[i][a] -= h;
        analytic[3 * i + a] = g[i][a];
        fd[3 * i + a] = (sinkhorn_divergence(PointCloud(plus), y, sp) -
                         sinkhorn_divergence(PointCloud(minus), y, sp)) /
                        (2.0 * h);
      }
    }
    corrupt(analytic, opt.break_component);
    const Eigen::VectorXd diff = analytic - fd;
    GradcheckCase c;
    c.seed = opt.seed + trial;
    c.relative_error = diff.cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff();
    c.worst_component = worst_index(diff);
    c.pass = c.relative_error <= rep.tolerance;
    rep.cases.push_back(c);
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

PhysicsToy make_physics_toy(std::uint64_t seed, const SimConfig& cfg, std::size_t particles,
                            int horizon) {
  // Slab resting on the ground, pin 5 mm above its top face.
  const double ground = cfg.ground_height();
  const double half_h = 0.06;
  const Vec3 centre(0.5 * cfg.domain, ground + half_h, cfg.dim == 2 ? 0.0 : 0.5 * cfg.domain);
  const ShapeProgram slab(Box{centre, Vec3(0.1, half_h, 0.1)});
  const PointCloud pc = cfg.dim == 2 ? sample_shape_slice(slab, particles, seed)
                                     : sample_shape(slab, particles, seed);
  SimState s0 = make_state(pc, cfg);
  ToolSpec tool = ToolSpec::rolling_pin(0.05, 0.3);
  const double r = tool.geometry.radius;
  ToolPose pose;
  pose.position = Vec3(centre.x() - 0.05, ground + 2.0 * half_h + r + 0.005, centre.z());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double vmax = cfg.max_speed;
  ActionSequence actions(horizon, tool.dof());
  for (int t = 0; t < horizon; ++t) {
    actions.values(t, 0) = 0.6 * vmax * u(rng);
    actions.values(t, 1) = -0.6 * vmax - 0.4 * vmax * u(rng);
    actions.values(t, 3) = 0.4 * (vmax / r) * u(rng);
  }
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<Vec3> cand;
  for (const auto& p : s0.x) {
    cand.push_back(p + Vec3(noise(rng), noise(rng), cfg.dim == 2 ? 0.0 : noise(rng)));
  }
  return PhysicsToy{std::move(s0), std::move(tool), pose, std::move(actions),
                    PointCloud(std::move(cand))};
}

GradcheckReport physics_gradcheck(const GradcheckOptions& opt, const SimConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  GradcheckReport rep;
  rep.module = "physics";
  rep.tolerance = 0.05;
  const int n = opt.instances > 0 ? opt.instances : 10;
  rep.required = (9 * n + 9) / 10;
  SimConfig adj = cfg, fdc = cfg;
  adj.gradient = GradientMode::kAdjoint;
  fdc.gradient = GradientMode::kFiniteDifference;
  for (int trial = 0; trial < n; ++trial) {
    const std::uint64_t seed = opt.seed + static_cast<std::uint64_t>(trial);
    const PhysicsToy toy = make_physics_toy(seed, cfg);
    Eigen::MatrixXd ga =
        grad_actions(toy.s0, toy.tool, toy.pose, toy.actions, toy.candidate, adj).grad;
    const Eigen::MatrixXd gf =
        grad_actions(toy.s0, toy.tool, toy.pose, toy.actions, toy.candidate, fdc).grad;
    // Row-major flattening: component index = step * dof + k.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> ra = ga, rf = gf;
    Eigen::Map<Eigen::VectorXd> va(ra.data(), ra.size());
    const Eigen::Map<const Eigen::VectorXd> vf(rf.data(), rf.size());
    corrupt(va, opt.break_component);
    const Eigen::VectorXd diff = va - vf;
    GradcheckCase c;
    c.seed = seed;
    c.relative_error = diff.norm() / vf.norm();
    c.worst_component = worst_index(diff);
    c.pass = c.relative_error <= rep.tolerance;
    rep.cases.push_back(c);
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

}  // namespace dough
