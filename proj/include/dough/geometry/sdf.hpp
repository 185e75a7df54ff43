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

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "dough/geometry/point_cloud.hpp"

namespace dough {

template <class T>
using Vec3T = Eigen::Matrix<T, 3, 1>;

/// Signed distance and outward unit normal at a query point. `part` names the
/// closest sub-solid for compound shapes (0 = -x plate, 1 = +x plate).
template <class T>
struct SdfSample {
  T distance{};
  Vec3T<T> normal;
  int part = 0;
};

enum class SdfKind { kSphere, kBox, kCapsule, kCylinder, kPlatePair };

namespace sdf_detail {

// Helpers that keep the scalar type concrete so the same code runs on double
// and on forward-mode dual numbers.
template <class T>
T tmax(const T& a, const T& b) {
  return a > b ? a : b;
}
template <class T>
T tmin(const T& a, const T& b) {
  return a < b ? a : b;
}
template <class T>
T tabs(const T& a) {
  return a < T(0.0) ? T(-a) : a;
}
template <class T>
double sign_of(const T& a) {
  return a < T(0.0) ? -1.0 : 1.0;
}
template <class T>
T tsqrt(const T& a) {
  using std::sqrt;
  return T(sqrt(a));
}

template <class T>
SdfSample<T> box(const Vec3T<T>& p, const Vec3& half) {
  Vec3T<T> q;
  for (int k = 0; k < 3; ++k) q[k] = T(tabs(p[k]) - half[k]);
  int arg = 0;
  for (int k = 1; k < 3; ++k) {
    if (q[k] > q[arg]) arg = k;
  }
  SdfSample<T> out;
  out.normal = Vec3T<T>::Zero();
  if (q[arg] > T(0.0)) {
    Vec3T<T> m;
    for (int k = 0; k < 3; ++k) m[k] = tmax(q[k], T(0.0));
    const T len = tsqrt(T(m.squaredNorm()));
    out.distance = len;
    for (int k = 0; k < 3; ++k) out.normal[k] = T(sign_of(p[k]) * m[k] / len);
  } else {
    out.distance = q[arg];
    out.normal[arg] = T(sign_of(p[arg]));
  }
  return out;
}

}  // namespace sdf_detail

/// Analytic signed distance field of a posed rigid solid: negative inside,
/// zero on the surface, 1-Lipschitz. Local frames:
///  - capsule: segment along local z with `half_length`;
///  - cylinder: axis along local y with half height `half_length`;
///  - plate pair: two boxes of `half_extents` facing each other across local
///    x, inner faces `gap` apart.
struct SdfPrimitive {
  SdfKind kind = SdfKind::kSphere;
  double radius = 0.0;
  Vec3 half_extents = Vec3::Zero();
  double half_length = 0.0;
  double gap = 0.0;
  double rounding = 0.0;  // box edge radius
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static SdfPrimitive sphere(double radius);
  /// `rounding` rounds every edge with that radius, keeping the outer
  /// extents; at most the smallest half extent.
  static SdfPrimitive box(const Vec3& half_extents, double rounding = 0.0);
  static SdfPrimitive capsule(double radius, double half_length);
  static SdfPrimitive cylinder(double radius, double half_height);
  static SdfPrimitive plate_pair(const Vec3& plate_half_extents, double gap);

  /// Throws DomainError for nonpositive geometry.
  void validate() const;

  SdfPrimitive posed(const Mat3& r, const Vec3& t) const {
    SdfPrimitive out = *this;
    out.rotation = r;
    out.translation = t;
    return out;
  }

  /// Local-frame evaluation with an explicit plate gap (ignored by other
  /// kinds). Templated on the scalar so contact code can differentiate it.
  template <class T>
  SdfSample<T> local(const Vec3T<T>& p, const T& plate_gap) const;

  double distance(const Vec3& world) const;
  SdfSample<double> sample(const Vec3& world) const;

  /// Half of the solid's extent along world y; used to place tools above
  /// the dough.
  double half_height() const;
  /// Local-frame bounding half extents.
  Vec3 bounding_half_extents() const;
};

/// Signed distances of every point of the cloud.
std::vector<double> sdf_eval(const SdfPrimitive& prim, const PointCloud& points);

template <class T>
SdfSample<T> SdfPrimitive::local(const Vec3T<T>& p, const T& plate_gap) const {
  using namespace sdf_detail;
  SdfSample<T> out;
  switch (kind) {
    case SdfKind::kSphere: {
      const T len = tsqrt(T(p.squaredNorm()));
      out.distance = T(len - radius);
      if (len > T(0.0)) {
        out.normal = p / len;
      } else {
        out.normal = Vec3T<T>(T(0.0), T(1.0), T(0.0));
      }
      return out;
    }
    case SdfKind::kBox: {
      if (rounding == 0.0) return sdf_detail::box<T>(p, half_extents);
      out = sdf_detail::box<T>(p, half_extents - Vec3::Constant(rounding));
      out.distance = T(out.distance - rounding);
      return out;
    }
    case SdfKind::kCapsule: {
      const T t = tmax(tmin(p[2], T(half_length)), T(-half_length));
      const Vec3T<T> v(p[0], p[1], T(p[2] - t));
      const T len = tsqrt(T(v.squaredNorm()));
      out.distance = T(len - radius);
      if (len > T(0.0)) {
        out.normal = v / len;
      } else {
        out.normal = Vec3T<T>(T(0.0), T(1.0), T(0.0));
      }
      return out;
    }
    case SdfKind::kCylinder: {
      const T rho = tsqrt(T(p[0] * p[0] + p[2] * p[2]));
      Vec3T<T> radial(T(1.0), T(0.0), T(0.0));
      if (rho > T(0.0)) radial = Vec3T<T>(T(p[0] / rho), T(0.0), T(p[2] / rho));
      const Vec3T<T> axial(T(0.0), T(sign_of(p[1])), T(0.0));
      const T dr = T(rho - radius);
      const T dy = T(tabs(p[1]) - half_length);
      if (dr > T(0.0) || dy > T(0.0)) {
        const T er = tmax(dr, T(0.0));
        const T ey = tmax(dy, T(0.0));
        const T len = tsqrt(T(er * er + ey * ey));
        out.distance = len;
        out.normal = (radial * er + axial * ey) / len;
      } else if (dr > dy) {
        out.distance = dr;
        out.normal = radial;
      } else {
        out.distance = dy;
        out.normal = axial;
      }
      return out;
    }
    case SdfKind::kPlatePair: {
      const T offset = T(T(0.5) * plate_gap + half_extents.x());
      Vec3T<T> left = p;
      left[0] = T(p[0] + offset);
      Vec3T<T> right = p;
      right[0] = T(p[0] - offset);
      SdfSample<T> a = sdf_detail::box<T>(left, half_extents);
      SdfSample<T> b = sdf_detail::box<T>(right, half_extents);
      if (b.distance < a.distance) {
        b.part = 1;
        return b;
      }
      a.part = 0;
      return a;
    }
  }
  return out;
}

}  // namespace dough
