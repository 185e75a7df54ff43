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

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "dough/errors.hpp"
#include "dough/geometry/ply.hpp"
#include "dough/geometry/point_cloud.hpp"
#include "dough/geometry/sdf.hpp"
#include "dough/geometry/shape_program.hpp"

namespace dough {
namespace {

constexpr double kPi = std::numbers::pi;

PointCloud random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  return PointCloud(std::move(pts));
}

TEST(PointCloud, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(PointCloud({}), DomainError);
  EXPECT_THROW(PointCloud({Vec3(0, NAN, 0)}), DomainError);
}

TEST(PointCloud, TranslationKeepsOrder) {
  const auto pc = random_cloud(50, 3);
  const auto moved = pc.translated(Vec3(1, 2, 3));
  ASSERT_EQ(moved.size(), pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) {
    EXPECT_TRUE((moved[i] - pc[i] - Vec3(1, 2, 3)).norm() < 1e-15);
  }
}

TEST(Aabb, SinglePoint) {
  const PointCloud pc({Vec3(0.3, -1, 2)});
  const auto box = aabb(pc);
  EXPECT_EQ(box.min, pc[0]);
  EXPECT_EQ(box.max, pc[0]);
}

TEST(Aabb, TwoPoints) {
  const auto box = aabb(PointCloud({Vec3(0, 0, 0), Vec3(1, 2, 3)}));
  EXPECT_EQ(box.min, Vec3(0, 0, 0));
  EXPECT_EQ(box.max, Vec3(1, 2, 3));
}

TEST(Aabb, ContainsEveryPointAndIsTight) {
  const auto pc = random_cloud(500, 11);
  const auto box = aabb(pc);
  Vec3 lo = Vec3::Constant(INFINITY), hi = Vec3::Constant(-INFINITY);
  for (const auto& p : pc) {
    EXPECT_TRUE(box.contains(p));
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  EXPECT_EQ(box.min, lo);
  EXPECT_EQ(box.max, hi);
}

TEST(SampleShape, SphereContainment) {
  const auto pc = sample_shape(Sphere{Vec3::Zero(), 1.0}, 1000, 7);
  ASSERT_EQ(pc.size(), 1000u);
  for (const auto& p : pc) EXPECT_LE(p.norm(), 1.0);
}

TEST(SampleShape, BoxMeanNearCenter) {
  const auto pc = sample_shape(Box{Vec3::Zero(), Vec3::Constant(0.5)}, 10000, 5);
  const Vec3 mean = pc.centroid();
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(mean[a], 0.0, 0.02);
}

TEST(SampleShape, DisjointBoxesSplitEvenly) {
  const auto prog = ShapeProgram::union_of(
      {Box{Vec3(-2, 0, 0), Vec3::Constant(0.5)}, Box{Vec3(2, 0, 0), Vec3::Constant(0.5)}});
  const auto pc = sample_shape(prog, 10000, 9);
  std::size_t left = 0;
  for (const auto& p : pc) left += p.x() < 0 ? 1 : 0;
  EXPECT_NEAR(static_cast<double>(left) / 10000.0, 0.5, 0.03);
}

TEST(SampleShape, OverlapIsNotDoubleCounted) {
  // Two identical boxes: a sampler that ignored overlap would still be
  // uniform, so use a box nested in a larger one and check density.
  const auto prog = ShapeProgram::union_of(
      {Box{Vec3::Zero(), Vec3::Constant(1.0)}, Box{Vec3(0.5, 0.5, 0.5), Vec3::Constant(0.5)}});
  const auto pc = sample_shape(prog, 20000, 1);
  std::size_t inner = 0;
  for (const auto& p : pc) inner += (p.array() > 0.0).all() ? 1 : 0;
  // Inner box is 1/8 of the union volume.
  EXPECT_NEAR(static_cast<double>(inner) / 20000.0, 0.125, 0.01);
}

TEST(SampleShape, DeterministicForSeed) {
  const ShapeProgram torus = Torus{Vec3(0, 1, 0), 1.0, 0.3, Vec3::UnitY()};
  EXPECT_EQ(sample_shape(torus, 300, 42), sample_shape(torus, 300, 42));
  EXPECT_FALSE(sample_shape(torus, 300, 42) == sample_shape(torus, 300, 43));
}

TEST(SampleShape, TransformsAreApplied) {
  const auto prog = ShapeProgram::translate(
      Vec3(5, 0, 0), ShapeProgram::rotate(Vec3::UnitZ(), 90.0,
                                           Box{Vec3::Zero(), Vec3(1.0, 0.1, 0.1)}));
  const auto pc = sample_shape(prog, 500, 2);
  for (const auto& p : pc) {
    EXPECT_NEAR(p.x(), 5.0, 0.1 + 1e-9);
    EXPECT_LE(std::abs(p.y()), 1.0 + 1e-9);
  }
}

TEST(SampleShape, SliceStaysInPlaneAndShape) {
  const ShapeProgram ball = Sphere{Vec3(0, 0.5, 0), 0.5};
  const auto pc = sample_shape_slice(ball, 400, 3, 0.0);
  for (const auto& p : pc) {
    EXPECT_EQ(p.z(), 0.0);
    EXPECT_LE((p - Vec3(0, 0.5, 0)).norm(), 0.5);
  }
  EXPECT_THROW(sample_shape_slice(ball, 10, 3, 2.0), InvalidShape);
}

TEST(SampleShape, InvalidPrograms) {
  EXPECT_THROW(sample_shape(Sphere{Vec3::Zero(), -1.0}, 10, 0), InvalidShape);
  EXPECT_THROW(sample_shape(ShapeProgram::union_of({}), 10, 0), InvalidShape);
  EXPECT_THROW(sample_shape(Torus{Vec3::Zero(), 0.2, 0.5, Vec3::UnitY()}, 10, 0),
               InvalidShape);
  EXPECT_THROW(sample_shape(Cylinder{Vec3::Zero(), 1, 1, Vec3::Zero()}, 10, 0),
               InvalidShape);
  EXPECT_THROW(sample_shape(Sphere{Vec3::Zero(), 1.0}, 0, 0), DomainError);
}

TEST(ShapeVolume, Analytic) {
  EXPECT_DOUBLE_EQ(shape_volume(Box{Vec3::Zero(), Vec3::Constant(0.5)}).value, 1.0);
  const auto torus = shape_volume(Torus{Vec3::Zero(), 1.0, 0.25, Vec3::UnitY()});
  EXPECT_TRUE(torus.exact);
  EXPECT_NEAR(torus.value, 2 * kPi * kPi * 1.0 * 0.0625, 1e-12);
  EXPECT_NEAR(torus.value, 1.2337, 1e-4);
  EXPECT_NEAR(shape_volume(Cylinder{Vec3::Zero(), 2.0, 0.5, Vec3::UnitX()}).value,
              kPi * 4.0 * 0.5, 1e-12);
  EXPECT_NEAR(shape_volume(Ellipsoid{Vec3::Zero(), Vec3(1, 0.5, 2)}).value,
              4.0 / 3.0 * kPi, 1e-12);
}

TEST(ShapeVolume, OverlappingSpheresMatchLensFormula) {
  // Oracle: closed-form lens volume of two radius-r spheres d apart,
  // V = pi (4r + d)(2r - d)^2 / 12.
  const double r = 1.0, d = 1.0;
  const double lens = kPi * (4 * r + d) * (2 * r - d) * (2 * r - d) / 12.0;
  const double expected = 2.0 * 4.0 / 3.0 * kPi - lens;
  const auto prog = ShapeProgram::union_of(
      {Sphere{Vec3::Zero(), r}, Sphere{Vec3(d, 0, 0), r}});
  const auto est = shape_volume(prog);
  EXPECT_FALSE(est.exact);
  EXPECT_GT(est.std_error, 0.0);
  EXPECT_LE(std::abs(est.value - expected), 3.0 * est.std_error);
}

TEST(ShapeVolume, DisjointUnionSumsWithinMonteCarloError) {
  // Bounding boxes overlap (forcing Monte Carlo) but the spheres do not.
  const auto prog = ShapeProgram::union_of(
      {Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(1.5, 1.5, 0), 1.0}});
  const auto est = shape_volume(prog, 1'000'000, 4);
  ASSERT_FALSE(est.exact);
  EXPECT_LE(std::abs(est.value - 8.0 / 3.0 * kPi), 3.0 * est.std_error);

  const auto far = ShapeProgram::union_of(
      {Sphere{Vec3::Zero(), 1.0}, Sphere{Vec3(5, 0, 0), 2.0}});
  const auto exact = shape_volume(far);
  EXPECT_TRUE(exact.exact);
  EXPECT_NEAR(exact.value, 4.0 / 3.0 * kPi * 9.0, 1e-12);
}

TEST(RelativeVolumeChange, Examples) {
  EXPECT_EQ(relative_volume_change(1.0, 1.0), 0.0);
  const double v1 = 4.0 / 3.0 * kPi, v2 = 4.0 / 3.0 * kPi * 8.0;
  EXPECT_NEAR(relative_volume_change(v1, v2), 7.0, 1e-12);
  EXPECT_NEAR(relative_volume_change(1.0, 1.098), 0.098, 1e-12);
  EXPECT_THROW(relative_volume_change(0.0, 1.0), DomainError);
  EXPECT_THROW(relative_volume_change(-1.0, 1.0), DomainError);
}

TEST(ShapeProgramJson, RoundTripAndErrors) {
  const auto prog = ShapeProgram::union_of(
      {Torus{Vec3(0, 0.1, 0), 0.2, 0.05, Vec3::UnitY()},
       ShapeProgram::rotate(Vec3::UnitX(), 30.0,
                            ShapeProgram::translate(Vec3(1, 0, 0), Cylinder{})),
       Ellipsoid{Vec3::Zero(), Vec3(1, 2, 3)}, Box{}, Sphere{}});
  const auto doc = prog.to_json();
  EXPECT_EQ(doc.at("dsl_version"), 1);
  EXPECT_EQ(ShapeProgram::from_json(doc), prog);
  EXPECT_EQ(ShapeProgram::from_json(nlohmann::json::parse(doc.dump())), prog);

  EXPECT_THROW(ShapeProgram::from_json(nlohmann::json{{"type", "cone"}}), InvalidShape);
  EXPECT_THROW(ShapeProgram::from_json(nlohmann::json{{"type", "sphere"}}), InvalidShape);
  EXPECT_THROW(ShapeProgram::from_json(
                   nlohmann::json{{"dsl_version", 7}, {"shape", {{"type", "sphere"}}}}),
               InvalidShape);
}

TEST(Sdf, SphereValues) {
  const auto s = SdfPrimitive::sphere(1.0);
  EXPECT_DOUBLE_EQ(s.distance(Vec3(2, 0, 0)), 1.0);
  EXPECT_DOUBLE_EQ(s.distance(Vec3::Zero()), -1.0);
  const auto d = sdf_eval(s, PointCloud({Vec3(2, 0, 0), Vec3::Zero()}));
  EXPECT_EQ(d, (std::vector<double>{1.0, -1.0}));
}

TEST(Sdf, BoxSignMatchesContainmentOnProbeGrid) {
  const Vec3 half(0.3, 0.2, 0.5);
  const Vec3 center(0.1, -0.2, 0.05);
  const auto sdf = SdfPrimitive::box(half).posed(Mat3::Identity(), center);
  const CompiledShape oracle(Box{center, half});
  int checked = 0;
  for (int i = 0; i < 25; ++i) {
    for (int j = 0; j < 25; ++j) {
      for (int k = 0; k < 25; ++k) {
        // Offset grid avoids probes exactly on faces.
        const Vec3 p = Vec3(i, j, k) * 0.0513 - Vec3::Constant(0.6037);
        const double d = sdf.distance(p);
        EXPECT_EQ(d < 0.0, oracle.contains(p)) << p.transpose();
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 25 * 25 * 25);
}

TEST(Sdf, CapsuleAndCylinderClosedForm) {
  const auto cap = SdfPrimitive::capsule(0.1, 0.5);
  EXPECT_NEAR(cap.distance(Vec3(0.3, 0, 0.2)), 0.2, 1e-15);
  EXPECT_NEAR(cap.distance(Vec3(0, 0, 0.9)), 0.3, 1e-15);
  EXPECT_NEAR(cap.distance(Vec3(0, 0.05, 0)), -0.05, 1e-15);
  const auto cyl = SdfPrimitive::cylinder(0.2, 0.5);
  EXPECT_NEAR(cyl.distance(Vec3(0, 0.7, 0)), 0.2, 1e-15);
  EXPECT_NEAR(cyl.distance(Vec3(0.5, 0, 0)), 0.3, 1e-15);
  EXPECT_NEAR(cyl.distance(Vec3(0.5, 0.9, 0)), 0.5, 1e-15);
  EXPECT_NEAR(cyl.distance(Vec3(0.1, 0.0, 0)), -0.1, 1e-15);
  const auto plates = SdfPrimitive::plate_pair(Vec3(0.01, 0.1, 0.1), 0.2);
  EXPECT_NEAR(plates.distance(Vec3::Zero()), 0.1, 1e-15);
  EXPECT_EQ(plates.sample(Vec3(0.05, 0, 0)).part, 1);
  EXPECT_EQ(plates.sample(Vec3(-0.05, 0, 0)).part, 0);
  EXPECT_LT(plates.distance(Vec3(0.11, 0, 0)), 0.0);
}

TEST(Sdf, LipschitzAndUnitNormals) {
  const Mat3 rot = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
  const std::vector<SdfPrimitive> prims = {
      SdfPrimitive::sphere(0.4),
      SdfPrimitive::box(Vec3(0.3, 0.1, 0.2)).posed(rot, Vec3(0.1, 0, 0)),
      SdfPrimitive::capsule(0.1, 0.3).posed(rot, Vec3::Zero()),
      SdfPrimitive::cylinder(0.2, 0.25),
      SdfPrimitive::plate_pair(Vec3(0.02, 0.2, 0.2), 0.3),
  };
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const auto& prim : prims) {
    for (int trial = 0; trial < 2000; ++trial) {
      const Vec3 a(u(rng), u(rng), u(rng));
      const Vec3 b(u(rng), u(rng), u(rng));
      EXPECT_LE(std::abs(prim.distance(a) - prim.distance(b)), (a - b).norm() + 1e-12);
      EXPECT_NEAR(prim.sample(a).normal.norm(), 1.0, 1e-12);
    }
  }
}

TEST(Ply, RoundTrip) {
  const auto pc = random_cloud(20, 8);
  std::stringstream ss;
  write_ply(ss, pc);
  EXPECT_EQ(read_ply(ss), pc);
  std::stringstream bad("not a ply\n");
  EXPECT_THROW(read_ply(bad), std::runtime_error);
}

}  // namespace
}  // namespace dough
