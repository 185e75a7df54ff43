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

#include "mpm.hpp"

#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>
#include <unsupported/Eigen/AutoDiff>

#include "dough/errors.hpp"

namespace dough::mpm {

namespace {

// Derivative slots of the contact Jacobian.
constexpr int kV = 0, kQ = 3, kGap = 6, kU = 7, kRate = 10, kParams = 11;

template <class T>
T smooth_influence(const T& phi, double layer) {
  if (phi <= T(0.0)) return T(1.0);
  const T t = T(phi / layer);
  return T(T(1.0) - t * t * (T(3.0) - T(2.0) * t));
}

// Grid velocity after tool contact. Inside the influence band the velocity
// is blended toward its projection: approaching normal motion relative to
// the tool surface is removed and the tangential slip is reduced by Coulomb
// friction.
template <class T>
Vec3T<T> contact_velocity(const ToolSpec& tool, double layer, const Vec3& node,
                          const Vec3T<T>& v, const Vec3T<T>& q, const T& gap,
                          const Vec3T<T>& u, const T& rate) {
  const Mat3& rot = tool.geometry.rotation;
  Vec3T<T> r, local;
  for (int k = 0; k < 3; ++k) r[k] = T(T(node[k]) - q[k]);
  for (int k = 0; k < 3; ++k) {
    local[k] = T(rot(0, k) * r[0] + rot(1, k) * r[1] + rot(2, k) * r[2]);
  }
  const SdfSample<T> s = tool.geometry.local<T>(local, gap);
  if (!(s.distance < T(layer))) return v;
  Vec3T<T> n;
  for (int k = 0; k < 3; ++k) {
    n[k] = T(rot(k, 0) * s.normal[0] + rot(k, 1) * s.normal[1] + rot(k, 2) * s.normal[2]);
  }
  Vec3T<T> vt = u;
  if (tool.kind == ToolKind::kRollingPin) {
    const Vec3 a = rot.col(2);
    vt[0] += rate * T(a[1] * r[2] - a[2] * r[1]);
    vt[1] += rate * T(a[2] * r[0] - a[0] * r[2]);
    vt[2] += rate * T(a[0] * r[1] - a[1] * r[0]);
  } else if (tool.kind == ToolKind::kGripper) {
    const double side = s.part == 0 ? -0.5 : 0.5;
    for (int k = 0; k < 3; ++k) vt[k] += T(side * rot(k, 0)) * rate;
  }
  const Vec3T<T> rel = v - vt;
  const T vn = rel.dot(n);
  if (!(vn < T(0.0))) return v;
  const Vec3T<T> rel_t = rel - vn * n;
  using std::sqrt;
  const T tn = sqrt(T(rel_t.squaredNorm() + 1e-30));
  T scale = T(T(1.0) + tool.friction * vn / tn);
  if (scale < T(0.0)) scale = T(0.0);
  const Vec3T<T> projected = vt + scale * rel_t;
  const T w = smooth_influence(s.distance, layer);
  return v + w * (projected - v);
}

// Walls: outward normal velocity is removed. The ground (low y) also
// applies Coulomb friction to the tangential part.
template <class T, int D>
void apply_boundary(Eigen::Matrix<T, D, 1>& v, const Eigen::Matrix<int, D, 1>& idx,
                    int last, int bound, double mu) {
  if (idx[1] <= bound && v[1] < T(0.0)) {
    const T vn = v[1];
    v[1] = T(0.0);
    T tn2 = T(0.0);
    for (int d = 0; d < D; ++d) {
      if (d != 1) tn2 += v[d] * v[d];
    }
    if (tn2 > T(0.0)) {
      using std::sqrt;
      const T tn = sqrt(tn2);
      T scale = T(T(1.0) + mu * vn / tn);
      if (scale < T(0.0)) scale = T(0.0);
      for (int d = 0; d < D; ++d) {
        if (d != 1) v[d] = T(v[d] * scale);
      }
    }
  }
  for (int d = 0; d < D; ++d) {
    if (idx[d] <= bound && v[d] < T(0.0)) v[d] = T(0.0);
    if (idx[d] >= last - bound && v[d] > T(0.0)) v[d] = T(0.0);
  }
}

template <int D>
struct Svd {
  Eigen::Matrix<double, D, D> U, V;
  Eigen::Matrix<double, D, 1> s;
};

// SVD with U and V proper rotations; a reflection shows up as a negative
// last singular value.
template <int D>
Svd<D> rotation_svd(const Eigen::Matrix<double, D, D>& f) {
  Eigen::JacobiSVD<Eigen::Matrix<double, D, D>> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Svd<D> out{svd.matrixU(), svd.matrixV(), svd.singularValues()};
  if (out.U.determinant() < 0.0) {
    out.U.col(D - 1) *= -1.0;
    out.s[D - 1] *= -1.0;
  }
  if (out.V.determinant() < 0.0) {
    out.V.col(D - 1) *= -1.0;
    out.s[D - 1] *= -1.0;
  }
  return out;
}

// First Piola stress of fixed-corotated elasticity, in principal form.
template <class T, int D>
Eigen::Matrix<T, D, 1> piola_sigma(const Eigen::Matrix<T, D, 1>& sig, double mu, double la) {
  T j = sig[0];
  for (int d = 1; d < D; ++d) j = T(j * sig[d]);
  Eigen::Matrix<T, D, 1> out;
  for (int d = 0; d < D; ++d) {
    out[d] = T(2.0 * mu * (sig[d] - 1.0) + la * (j - 1.0) * j / sig[d]);
  }
  return out;
}

// Von Mises return mapping on the Hencky strain, in principal form.
template <class T, int D>
Eigen::Matrix<T, D, 1> plastic_sigma(const Eigen::Matrix<T, D, 1>& sig, double mu,
                                     double yield, double* dgamma = nullptr) {
  using std::exp;
  using std::log;
  using std::sqrt;
  Eigen::Matrix<T, D, 1> eps;
  T trace = T(0.0);
  for (int d = 0; d < D; ++d) {
    eps[d] = log(sig[d]);
    trace += eps[d];
  }
  Eigen::Matrix<T, D, 1> dev;
  T norm2 = T(0.0);
  for (int d = 0; d < D; ++d) {
    dev[d] = T(eps[d] - trace / double(D));
    norm2 += dev[d] * dev[d];
  }
  if (dgamma) *dgamma = 0.0;
  if (norm2 > T(0.0)) {
    const T norm = sqrt(norm2);
    const T gamma = T(norm - yield / (2.0 * mu));
    if (gamma > T(0.0)) {
      for (int d = 0; d < D; ++d) eps[d] = T(eps[d] - gamma / norm * dev[d]);
      if (dgamma) {
        if constexpr (std::is_same_v<T, double>) *dgamma = gamma;
      }
    }
  }
  Eigen::Matrix<T, D, 1> out;
  for (int d = 0; d < D; ++d) out[d] = exp(eps[d]);
  return out;
}

// J(i, j) = d s_i / d sigma_j.
template <int D, class Fn>
Eigen::Matrix<double, D, D> principal_jacobian(const Eigen::Matrix<double, D, 1>& sig, Fn fn) {
  using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, D, 1>>;
  Eigen::Matrix<Ad, D, 1> a;
  for (int d = 0; d < D; ++d) a[d] = Ad(sig[d], D, d);
  const Eigen::Matrix<Ad, D, 1> r = fn(a);
  Eigen::Matrix<double, D, D> jac;
  for (int d = 0; d < D; ++d) jac.row(d) = r[d].derivatives().transpose();
  return jac;
}

// Adjoint of G(F) = U diag(s(sigma)) V^T for an isotropic principal map s.
template <int D>
Eigen::Matrix<double, D, D> spectral_adjoint(const Svd<D>& svd, const Eigen::Matrix<double, D, 1>& s,
                                             const Eigen::Matrix<double, D, D>& ds,
                                             const Eigen::Matrix<double, D, D>& gbar) {
  const Eigen::Matrix<double, D, D> g = svd.U.transpose() * gbar * svd.V;
  Eigen::Matrix<double, D, D> m = Eigen::Matrix<double, D, D>::Zero();
  for (int j = 0; j < D; ++j) {
    for (int i = 0; i < D; ++i) m(j, j) += ds(i, j) * g(i, i);
  }
  for (int i = 0; i < D; ++i) {
    for (int j = i + 1; j < D; ++j) {
      const double diff = svd.s[i] - svd.s[j];
      const double scale = std::max({1.0, std::abs(svd.s[i]), std::abs(svd.s[j])});
      const double r1 = std::abs(diff) > 1e-7 * scale ? (s[i] - s[j]) / diff
                                                       : ds(i, i) - ds(i, j);
      const double r2 = (s[i] + s[j]) / std::max(svd.s[i] + svd.s[j], 1e-8);
      const double a = 0.5 * (r1 + r2);
      const double b = 0.5 * (r1 - r2);
      m(i, j) = a * g(i, j) + b * g(j, i);
      m(j, i) = a * g(j, i) + b * g(i, j);
    }
  }
  return svd.U * m * svd.V.transpose();
}

template <int D>
Eigen::Matrix<double, D, D> compose(const Svd<D>& svd, const Eigen::Matrix<double, D, 1>& s) {
  return svd.U * s.asDiagonal() * svd.V.transpose();
}

template <class T, int D>
Vec3T<T> lift(const Eigen::Matrix<T, D, 1>& v) {
  Vec3T<T> out;
  for (int k = 0; k < 3; ++k) out[k] = k < D ? v[k] : T(0.0);
  return out;
}

}  // namespace

template <int D>
Solver<D>::Solver(const SimConfig& cfg, const ToolSpec& tool, double mass, double volume)
    : cfg_(cfg),
      tool_(tool),
      mass_(mass),
      volume_(volume),
      dx_(cfg.dx()),
      inv_dx_(1.0 / cfg.dx()),
      n_(cfg.grid_res + 1),
      cells_(1) {
  for (int d = 0; d < D; ++d) cells_ *= n_;
}

template <int D>
void Solver<D>::stencil(const Vec& x, Stencil& st, std::size_t step) const {
  std::array<std::array<double, 3>, D> nw, dnw;
  for (int d = 0; d < D; ++d) {
    const double g = x[d] * inv_dx_;
    const double b = std::floor(g - 0.5);
    if (!(b >= 0.0) || b + 2.0 > cfg_.grid_res) {
      throw SimulationDiverged("particle left the grid", step);
    }
    st.base[d] = static_cast<int>(b);
    const double f = g - b;
    st.fx[d] = f;
    nw[d] = {0.5 * (1.5 - f) * (1.5 - f), 0.75 - (f - 1.0) * (f - 1.0),
             0.5 * (f - 0.5) * (f - 0.5)};
    dnw[d] = {f - 1.5, -2.0 * (f - 1.0), f - 0.5};
  }
  for (int k = 0; k < kStencil; ++k) {
    int o[D];
    int rem = k;
    for (int d = 0; d < D; ++d) {
      o[d] = rem % 3;
      rem /= 3;
    }
    double w = 1.0;
    int node = 0, stride = 1;
    for (int d = 0; d < D; ++d) {
      w *= nw[d][o[d]];
      st.dpos[k][d] = (o[d] - st.fx[d]) * dx_;
      node += (st.base[d] + o[d]) * stride;
      stride *= n_;
    }
    for (int d = 0; d < D; ++d) {
      double g = dnw[d][o[d]];
      for (int e = 0; e < D; ++e) {
        if (e != d) g *= nw[e][o[e]];
      }
      st.dw[k][d] = g;
    }
    st.w[k] = w;
    st.node[k] = node;
  }
}

template <int D>
typename Solver<D>::Mat Solver<D>::kirchhoff_term(const Mat& f) const {
  const auto svd = rotation_svd<D>(f);
  const double mu = cfg_.material.mu(), la = cfg_.material.lambda();
  const Vec p = piola_sigma<double, D>(svd.s, mu, la);
  return compose<D>(svd, p) * f.transpose();
}

template <int D>
void Solver<D>::substep(const Particles<D>& in, const ToolState& tool, Particles<D>& out,
                        Grid<D>& grid, std::size_t step) const {
  const double dt = cfg_.dt;
  const double stress_coef = -dt * volume_ * 4.0 * inv_dx_ * inv_dx_;
  const std::size_t np = in.size();
  grid.m.assign(cells_, 0.0);
  grid.mv.assign(cells_, Vec::Zero());
  grid.v_out.assign(cells_, Vec::Zero());
  grid.active.clear();

  Stencil st;
  for (std::size_t p = 0; p < np; ++p) {
    stencil(in.x[p], st, step);
    const Mat affine = stress_coef * kirchhoff_term(in.F[p]) + mass_ * in.C[p];
    const Vec mom = mass_ * in.v[p];
    for (int k = 0; k < kStencil; ++k) {
      grid.m[st.node[k]] += st.w[k] * mass_;
      grid.mv[st.node[k]] += st.w[k] * (mom + affine * st.dpos[k]);
    }
  }

  const double layer = cfg_.contact_layer_cells * dx_;
  const Vec3 q = tool.q;
  const Vec3 u = tool.u;
  for (int c = 0; c < cells_; ++c) {
    if (!(grid.m[c] > 0.0)) continue;
    grid.active.push_back(c);
    IVec idx;
    Vec3 pos = Vec3::Zero();
    int rem = c;
    for (int d = 0; d < D; ++d) {
      idx[d] = rem % n_;
      rem /= n_;
      pos[d] = idx[d] * dx_;
    }
    Vec v = grid.mv[c] / grid.m[c];
    v[1] -= dt * cfg_.gravity;
    const Vec3 vc = contact_velocity<double>(tool_, layer, pos, lift<double, D>(v), q,
                                             tool.gap, u, tool.rate);
    Vec vb = vc.template head<D>();
    apply_boundary<double, D>(vb, idx, n_ - 1, cfg_.boundary_cells, cfg_.ground_friction);
    grid.v_out[c] = vb;
  }

  out.resize(np);
  const double mu = cfg_.material.mu();
  const double yield = cfg_.material.yield_stress;
  for (std::size_t p = 0; p < np; ++p) {
    stencil(in.x[p], st, step);
    Vec nv = Vec::Zero();
    Mat nc = Mat::Zero();
    for (int k = 0; k < kStencil; ++k) {
      const Vec& gv = grid.v_out[st.node[k]];
      nv += st.w[k] * gv;
      nc += (4.0 * inv_dx_ * inv_dx_ * st.w[k]) * gv * st.dpos[k].transpose();
    }
    out.v[p] = nv;
    out.C[p] = nc;
    out.x[p] = in.x[p] + dt * nv;
    const Mat ftr = (Mat::Identity() + dt * nc) * in.F[p];
    const auto svd = rotation_svd<D>(ftr);
    if (!(svd.s[D - 1] > 0.0) || !ftr.allFinite()) {
      throw SimulationDiverged("inverted or non-finite deformation", step);
    }
    double dgamma = 0.0;
    const Vec s = plastic_sigma<double, D>(svd.s, mu, yield, &dgamma);
    out.F[p] = compose<D>(svd, s);
    out.plastic[p] = in.plastic[p] + dgamma;
    if (!out.x[p].allFinite() || !nv.allFinite()) {
      throw SimulationDiverged("non-finite particle state", step);
    }
  }
}

template <int D>
void Solver<D>::substep_adjoint(const Particles<D>& in, const ToolState& tool,
                                const Grid<D>& grid, const Particles<D>& out,
                                const Particles<D>& out_bar, Particles<D>& in_bar,
                                ToolAdjoint& tool_bar) const {
  const double dt = cfg_.dt;
  const double stress_coef = -dt * volume_ * 4.0 * inv_dx_ * inv_dx_;
  const double apic = 4.0 * inv_dx_ * inv_dx_;
  const double mu = cfg_.material.mu(), la = cfg_.material.lambda();
  const double yield = cfg_.material.yield_stress;
  const std::size_t np = in.size();
  in_bar.resize(np);
  std::vector<Vec> gv_bar(cells_, Vec::Zero());

  // Grid-to-particle and plasticity.
  Stencil st;
  for (std::size_t p = 0; p < np; ++p) {
    stencil(in.x[p], st, 0);
    const Mat grow = Mat::Identity() + dt * out.C[p];
    const Mat ftr = grow * in.F[p];
    const auto svd = rotation_svd<D>(ftr);
    const Vec s = plastic_sigma<double, D>(svd.s, mu, yield);
    const Mat ds = principal_jacobian<D>(svd.s, [&](const auto& sig) {
      return plastic_sigma(sig, mu, yield);
    });
    const Mat ftr_bar = spectral_adjoint<D>(svd, s, ds, out_bar.F[p]);
    in_bar.F[p] = grow.transpose() * ftr_bar;
    const Mat c_bar = out_bar.C[p] + dt * ftr_bar * in.F[p].transpose();
    const Vec v_bar = out_bar.v[p] + dt * out_bar.x[p];
    Vec x_bar = out_bar.x[p];
    for (int k = 0; k < kStencil; ++k) {
      const Vec& gv = grid.v_out[st.node[k]];
      const Vec cd = c_bar * st.dpos[k];
      gv_bar[st.node[k]] += st.w[k] * v_bar + (apic * st.w[k]) * cd;
      const double w_bar = v_bar.dot(gv) + apic * gv.dot(cd);
      const Vec dpos_bar = (apic * st.w[k]) * (c_bar.transpose() * gv);
      x_bar += (w_bar * inv_dx_) * st.dw[k] - dpos_bar;
    }
    in_bar.x[p] = x_bar;
    in_bar.plastic[p] = out_bar.plastic[p];
  }

  // Grid update: gravity, tool contact and walls.
  using Ad = Eigen::AutoDiffScalar<Eigen::Matrix<double, kParams, 1>>;
  const double layer = cfg_.contact_layer_cells * dx_;
  std::vector<Vec> mv_bar(cells_, Vec::Zero());
  std::vector<double> m_bar(cells_, 0.0);
  for (int c : grid.active) {
    if (gv_bar[c].isZero(0.0)) continue;
    IVec idx;
    Vec3 pos = Vec3::Zero();
    int rem = c;
    for (int d = 0; d < D; ++d) {
      idx[d] = rem % n_;
      rem /= n_;
      pos[d] = idx[d] * dx_;
    }
    Vec v = grid.mv[c] / grid.m[c];
    v[1] -= dt * cfg_.gravity;
    Vec3T<Ad> va, qa, ua;
    const Vec3 v3 = lift<double, D>(v);
    for (int k = 0; k < 3; ++k) {
      va[k] = Ad(v3[k], kParams, kV + k);
      qa[k] = Ad(tool.q[k], kParams, kQ + k);
      ua[k] = Ad(tool.u[k], kParams, kU + k);
    }
    const Ad gap(tool.gap, kParams, kGap);
    const Ad rate(tool.rate, kParams, kRate);
    const Vec3T<Ad> vc = contact_velocity<Ad>(tool_, layer, pos, va, qa, gap, ua, rate);
    Eigen::Matrix<Ad, D, 1> vb = vc.template head<D>();
    apply_boundary<Ad, D>(vb, idx, n_ - 1, cfg_.boundary_cells, cfg_.ground_friction);
    Eigen::Matrix<double, kParams, 1> jt = Eigen::Matrix<double, kParams, 1>::Zero();
    for (int d = 0; d < D; ++d) {
      if (vb[d].derivatives().size() == kParams) jt += gv_bar[c][d] * vb[d].derivatives();
    }
    const Vec vin_bar = jt.template segment<D>(kV);
    tool_bar.q += jt.template segment<3>(kQ);
    tool_bar.gap += jt[kGap];
    tool_bar.u += jt.template segment<3>(kU);
    tool_bar.rate += jt[kRate];
    mv_bar[c] = vin_bar / grid.m[c];
    m_bar[c] = -vin_bar.dot(grid.mv[c]) / (grid.m[c] * grid.m[c]);
  }

  // Particle-to-grid and stress.
  for (std::size_t p = 0; p < np; ++p) {
    stencil(in.x[p], st, 0);
    const auto svd = rotation_svd<D>(in.F[p]);
    const Vec pk = piola_sigma<double, D>(svd.s, mu, la);
    const Mat piola = compose<D>(svd, pk);
    const Mat affine = stress_coef * (piola * in.F[p].transpose()) + mass_ * in.C[p];
    const Vec mom = mass_ * in.v[p];
    Vec v_bar = Vec::Zero();
    Mat a_bar = Mat::Zero();
    Vec x_bar = Vec::Zero();
    for (int k = 0; k < kStencil; ++k) {
      const int c = st.node[k];
      const Vec& mvb = mv_bar[c];
      v_bar += (st.w[k] * mass_) * mvb;
      a_bar += st.w[k] * mvb * st.dpos[k].transpose();
      const double w_bar = mass_ * m_bar[c] + mvb.dot(mom + affine * st.dpos[k]);
      const Vec dpos_bar = st.w[k] * (affine.transpose() * mvb);
      x_bar += (w_bar * inv_dx_) * st.dw[k] - dpos_bar;
    }
    in_bar.x[p] += x_bar;
    in_bar.v[p] = v_bar;
    in_bar.C[p] = mass_ * a_bar;
    const Mat s_bar = stress_coef * a_bar;
    const Mat p_bar = s_bar * in.F[p];
    const Mat dp = principal_jacobian<D>(svd.s, [&](const auto& sig) {
      return piola_sigma(sig, mu, la);
    });
    in_bar.F[p] += s_bar.transpose() * piola + spectral_adjoint<D>(svd, pk, dp, p_bar);
  }
}

template <int D>
Particles<D> Solver<D>::from_state(const SimState& s) {
  Particles<D> p;
  p.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    p.x[i] = s.x[i].template head<D>();
    p.v[i] = s.v[i].template head<D>();
    p.C[i] = s.C[i].template topLeftCorner<D, D>();
    p.F[i] = s.F[i].template topLeftCorner<D, D>();
    p.plastic[i] = s.plastic_strain[i];
  }
  return p;
}

template <int D>
void Solver<D>::to_state(const Particles<D>& p, SimState& s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    s.x[i].template head<D>() = p.x[i];
    s.v[i].template head<D>() = p.v[i];
    s.C[i].template topLeftCorner<D, D>() = p.C[i];
    s.F[i].template topLeftCorner<D, D>() = p.F[i];
    s.plastic_strain[i] = p.plastic[i];
  }
}

namespace {

ToolState tool_state(const ToolSpec& tool, const ToolPose& pose, const Eigen::VectorXd& a,
                     int dim) {
  ToolState ts;
  ts.q = pose.position;
  ts.gap = pose.opening;
  ts.u = a.head<3>();
  if (dim == 2) ts.u.z() = 0.0;
  ts.rate = tool.dof() > 3 ? a[3] : 0.0;
  return ts;
}

void advance(const ToolSpec& tool, ToolPose& pose, const ToolState& ts, double dt) {
  pose.position += dt * ts.u;
  if (tool.kind == ToolKind::kRollingPin) pose.angle += dt * ts.rate;
  if (tool.kind == ToolKind::kGripper) pose.opening += dt * ts.rate;
}

template <int D>
PointCloud cloud_of(const Particles<D>& p) {
  std::vector<Vec3> pts(p.size(), Vec3::Zero());
  for (std::size_t i = 0; i < p.size(); ++i) pts[i].template head<D>() = p.x[i];
  return PointCloud(std::move(pts));
}

void check_inputs(const SimState& s0, const ToolSpec& tool, const ActionSequence& actions,
                  const SimConfig& cfg, bool check_bounds = true) {
  cfg.validate();
  tool.validate();
  if (check_bounds) {
    actions.validate(tool, cfg.max_speed);
  } else if (actions.dof() != tool.dof() || actions.steps() < 1 || !actions.values.allFinite()) {
    throw DomainError("malformed action sequence");
  }
  if (s0.size() == 0) throw DomainError("simulation state is empty");
  if (s0.v.size() != s0.size() || s0.F.size() != s0.size() || s0.C.size() != s0.size() ||
      s0.plastic_strain.size() != s0.size()) {
    throw DomainError("simulation state arrays differ in length");
  }
  if (!(s0.particle_mass > 0.0) || !(s0.particle_volume > 0.0)) {
    throw DomainError("particle mass and volume must be positive");
  }
}

}  // namespace

template <int D>
RolloutResult rollout_impl(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                           const ActionSequence& actions, const SimConfig& cfg,
                           bool check_bounds) {
  check_inputs(s0, tool, actions, cfg, check_bounds);
  const Solver<D> solver(cfg, tool, s0.particle_mass, s0.particle_volume);
  Particles<D> cur = Solver<D>::from_state(s0), next;
  Grid<D> grid;
  ToolPose pose = pose0;
  RolloutResult out;
  out.trajectory.reserve(actions.steps());
  for (int t = 0; t < actions.steps(); ++t) {
    const Eigen::VectorXd a = actions.values.row(t).transpose();
    for (int k = 0; k < cfg.substeps; ++k) {
      const ToolState ts = tool_state(tool, pose, a, cfg.dim);
      solver.substep(cur, ts, next, grid, static_cast<std::size_t>(t));
      std::swap(cur, next);
      advance(tool, pose, ts, cfg.dt);
    }
    out.trajectory.push_back(cloud_of(cur));
  }
  out.state = s0;
  Solver<D>::to_state(cur, out.state);
  out.state.time = s0.time + actions.steps() * cfg.step_duration();
  out.pose = pose;
  return out;
}

template <int D>
Eigen::MatrixXd adjoint_impl(const SimState& s0, const ToolSpec& tool, const ToolPose& pose0,
                             const ActionSequence& actions, const SimConfig& cfg,
                             const SeedFn& seed, RolloutResult& forward) {
  check_inputs(s0, tool, actions, cfg);
  const Solver<D> solver(cfg, tool, s0.particle_mass, s0.particle_volume);
  const int steps = actions.steps();
  const int sub = cfg.substeps;

  // Forward pass keeping one checkpoint per action step.
  std::vector<Particles<D>> checkpoints;
  std::vector<ToolPose> poses;
  checkpoints.reserve(steps);
  poses.reserve(steps);
  Particles<D> cur = Solver<D>::from_state(s0), next;
  Grid<D> scratch;
  ToolPose pose = pose0;
  forward.trajectory.clear();
  for (int t = 0; t < steps; ++t) {
    checkpoints.push_back(cur);
    poses.push_back(pose);
    const Eigen::VectorXd a = actions.values.row(t).transpose();
    for (int k = 0; k < sub; ++k) {
      const ToolState ts = tool_state(tool, pose, a, cfg.dim);
      solver.substep(cur, ts, next, scratch, static_cast<std::size_t>(t));
      std::swap(cur, next);
      advance(tool, pose, ts, cfg.dt);
    }
    forward.trajectory.push_back(cloud_of(cur));
  }
  forward.state = s0;
  Solver<D>::to_state(cur, forward.state);
  forward.state.time = s0.time + steps * cfg.step_duration();
  forward.pose = pose;

  const FinalAdjoint fin = seed(forward);
  Particles<D> bar, prev_bar;
  bar.resize(cur.size());
  for (auto& f : bar.F) f.setZero();
  for (std::size_t i = 0; i < cur.size(); ++i) bar.x[i] = fin.x[i].template head<D>();
  Vec3 q_bar = fin.q;
  double gap_bar = fin.gap;

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(steps, actions.dof());
  std::vector<Particles<D>> states(sub + 1);
  std::vector<Grid<D>> grids(sub);
  std::vector<ToolState> tools(sub);
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::VectorXd a = actions.values.row(t).transpose();
    states[0] = checkpoints[t];
    ToolPose p = poses[t];
    for (int k = 0; k < sub; ++k) {
      tools[k] = tool_state(tool, p, a, cfg.dim);
      solver.substep(states[k], tools[k], states[k + 1], grids[k], static_cast<std::size_t>(t));
      advance(tool, p, tools[k], cfg.dt);
    }
    Vec3 u_bar = Vec3::Zero();
    double rate_bar = 0.0;
    for (int k = sub - 1; k >= 0; --k) {
      u_bar += cfg.dt * q_bar;
      if (tool.kind == ToolKind::kGripper) rate_bar += cfg.dt * gap_bar;
      ToolAdjoint tb;
      solver.substep_adjoint(states[k], tools[k], grids[k], states[k + 1], bar, prev_bar, tb);
      std::swap(bar, prev_bar);
      q_bar += tb.q;
      gap_bar += tb.gap;
      u_bar += tb.u;
      rate_bar += tb.rate;
    }
    if (cfg.dim == 2) u_bar.z() = 0.0;
    grad.row(t).head<3>() = u_bar.transpose();
    if (actions.dof() > 3) grad(t, 3) = rate_bar;
  }
  return grad;
}

template class Solver<2>;
template class Solver<3>;
template RolloutResult rollout_impl<2>(const SimState&, const ToolSpec&, const ToolPose&,
                                       const ActionSequence&, const SimConfig&, bool);
template RolloutResult rollout_impl<3>(const SimState&, const ToolSpec&, const ToolPose&,
                                       const ActionSequence&, const SimConfig&, bool);
template Eigen::MatrixXd adjoint_impl<2>(const SimState&, const ToolSpec&, const ToolPose&,
                                         const ActionSequence&, const SimConfig&,
                                         const SeedFn&, RolloutResult&);
template Eigen::MatrixXd adjoint_impl<3>(const SimState&, const ToolSpec&, const ToolPose&,
                                         const ActionSequence&, const SimConfig&,
                                         const SeedFn&, RolloutResult&);

}  // namespace dough::mpm
