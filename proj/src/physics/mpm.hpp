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

// Internal MLS-MPM kernels shared by rollout and the adjoint.

#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "dough/physics/sim.hpp"

namespace dough::mpm {

/// Tool kinematics during one substep: pose at the start of the substep and
/// the action-row velocities.
struct ToolState {
  Vec3 q = Vec3::Zero();
  double gap = 0.0;
  Vec3 u = Vec3::Zero();
  double rate = 0.0;
};

struct ToolAdjoint {
  Vec3 q = Vec3::Zero();
  double gap = 0.0;
  Vec3 u = Vec3::Zero();
  double rate = 0.0;
};

template <int D>
struct Particles {
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  std::vector<Vec> x, v;
  std::vector<Mat> C, F;
  std::vector<double> plastic;

  void resize(std::size_t n) {
    x.assign(n, Vec::Zero());
    v.assign(n, Vec::Zero());
    C.assign(n, Mat::Zero());
    F.assign(n, Mat::Zero());
    plastic.assign(n, 0.0);
  }
  std::size_t size() const { return x.size(); }
};

template <int D>
struct Grid {
  using Vec = Eigen::Matrix<double, D, 1>;
  std::vector<double> m;
  std::vector<Vec> mv;
  std::vector<Vec> v_out;
  std::vector<int> active;
};

template <int D>
class Solver {
 public:
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  using IVec = Eigen::Matrix<int, D, 1>;
  static constexpr int kStencil = D == 2 ? 9 : 27;

  Solver(const SimConfig& cfg, const ToolSpec& tool, double mass, double volume);

  /// One explicit substep. `step` is only used for error reporting.
  void substep(const Particles<D>& in, const ToolState& tool, Particles<D>& out,
               Grid<D>& grid, std::size_t step) const;

  /// Reverse of substep: given adjoints of `out`, accumulate adjoints of
  /// `in` (overwritten) and of the tool state (added).
  void substep_adjoint(const Particles<D>& in, const ToolState& tool,
                       const Grid<D>& grid, const Particles<D>& out,
                       const Particles<D>& out_bar, Particles<D>& in_bar,
                       ToolAdjoint& tool_bar) const;

  static Particles<D> from_state(const SimState& s);
  static void to_state(const Particles<D>& p, SimState& s);

 private:
  struct Stencil {
    IVec base;
    Vec fx;
    std::array<double, kStencil> w;
    std::array<Vec, kStencil> dw;   // d w / d fx
    std::array<Vec, kStencil> dpos;
    std::array<int, kStencil> node;
  };

  void stencil(const Vec& x, Stencil& st, std::size_t step) const;
  Mat kirchhoff_term(const Mat& F) const;

  SimConfig cfg_;
  ToolSpec tool_;
  double mass_;
  double volume_;
  double dx_;
  double inv_dx_;
  int n_;  // nodes per axis
  int cells_;
};

/// Loss adjoint at the end of a rollout: per-particle position adjoints and
/// adjoints of the final tool position and gripper opening.
struct FinalAdjoint {
  std::vector<Vec3> x;
  Vec3 q = Vec3::Zero();
  double gap = 0.0;
};

/// `check_bounds` = false admits out-of-bound actions (finite differences
/// probe past the bound).
template <int D>
RolloutResult rollout_impl(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                           const ActionSequence& actions, const SimConfig& cfg,
                           bool check_bounds = true);

/// Reverse-mode gradient of a terminal loss w.r.t. the actions. `seed`
/// receives the forward result and returns the terminal adjoint. Each action
/// step is recomputed from a checkpoint before being reversed.
using SeedFn = std::function<FinalAdjoint(const RolloutResult&)>;

template <int D>
Eigen::MatrixXd adjoint_impl(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                             const ActionSequence& actions, const SimConfig& cfg,
                             const SeedFn& seed, RolloutResult& forward);

}  // namespace dough::mpm
