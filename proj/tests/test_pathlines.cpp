#include "carotid/error.hpp"
#include "carotid/pathlines.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace carotid;
using carotid::testing::circle_points;
using carotid::testing::make_field;
using carotid::testing::make_mask;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kOmega = kPi / 100.0;  // rad/ms

VelocityField uniform_field(const Vec3& v, double lo = -2.0, double hi = 22.0, double spacing = 1.0) {
  const int n = static_cast<int>(std::lround((hi - lo) / spacing)) + 1;
  return make_field({n, 9, 9}, Affine::from_spacing(Vec3(spacing, spacing, spacing), Vec3(lo, -4, -4)),
                    [v](const Vec3&) { return v; });
}

VelocityField rotation_field() {
  return make_field({49, 49, 3}, Affine::from_spacing(Vec3(0.5, 0.5, 0.5), Vec3(-12, -12, -0.5)),
                    [](const Vec3& p) { return Vec3(-kOmega * p.y(), kOmega * p.x(), 0.0); });
}

CrossSectionPlane plane_at_origin() {
  CrossSectionPlane p;
  p.frame = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  p.fov = 12.0;
  return p;
}

}  // namespace

TEST(Trace, UniformFieldEndpointIsExact) {
  const auto f = uniform_field(Vec3(1, 0, 0));
  const PathlineSet s = trace(f, {Vec3::Zero()}, 0.0, 10.0, 0.5);
  ASSERT_EQ(s.lines.size(), 1u);
  const auto& l = s.lines[0];
  EXPECT_EQ(l.termination, Termination::max_duration);
  EXPECT_DOUBLE_EQ(l.vertices.back().position.x(), 10.0);
  EXPECT_DOUBLE_EQ(l.vertices.back().t, 10.0);
  EXPECT_EQ(l.vertices.size(), 21u);
}

TEST(Trace, LastStepClippedToDuration) {
  const auto f = uniform_field(Vec3(1, 0, 0));
  const auto& l = trace(f, {Vec3::Zero()}, 0.0, 10.0, 0.3).lines[0];
  EXPECT_DOUBLE_EQ(l.vertices.back().t, 10.0);
  EXPECT_NEAR(l.vertices.back().position.x(), 10.0, 1e-12);
  for (std::size_t i = 1; i < l.vertices.size(); ++i) EXPECT_GT(l.vertices[i].t, l.vertices[i - 1].t);
}

TEST(Trace, RigidRotationHalfTurn) {
  const auto f = rotation_field();
  const auto& l = trace(f, {Vec3(10, 0, 0)}, 0.0, 100.0, 0.1).lines[0];
  EXPECT_EQ(l.termination, Termination::max_duration);
  EXPECT_LT((l.vertices.back().position - Vec3(-10, 0, 0)).norm(), 1e-3);
}

TEST(Trace, Rk4ConvergenceOrderOnRotation) {
  const auto f = rotation_field();
  std::vector<double> logs_dt, logs_err;
  for (double dt : {0.8, 0.4, 0.2, 0.1}) {
    const auto& l = trace(f, {Vec3(10, 0, 0)}, 0.0, 100.0, dt).lines[0];
    logs_dt.push_back(std::log(dt));
    logs_err.push_back(std::log((l.vertices.back().position - Vec3(-10, 0, 0)).norm()));
  }
  // least-squares slope
  const double n = 4, sx = logs_dt[0] + logs_dt[1] + logs_dt[2] + logs_dt[3];
  double sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < 4; ++i) {
    sy += logs_err[i];
    sxx += logs_dt[i] * logs_dt[i];
    sxy += logs_dt[i] * logs_err[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_GE(slope, 3.9);
}

TEST(Trace, StoredSpeedEqualsSampledMagnitude) {
  const auto f = rotation_field();
  const auto& l = trace(f, {Vec3(4, 1, 0)}, 3.0, 50.0, 0.7).lines[0];
  for (const auto& v : l.vertices) EXPECT_NEAR(v.speed, f.sample(v.position, v.t)->norm(), 1e-9);
}

TEST(Trace, HalfSpaceMaskGivesMaskExit) {
  const auto f = uniform_field(Vec3(1, 0, 0));
  const BinaryMask mask = make_mask({25, 9, 9}, Affine::from_spacing(Vec3(1, 1, 1), Vec3(-2, -4, -4)),
                                    [](const Vec3& p) { return p.x() < 5.0; });
  const PathlineSet masked = trace(f, {Vec3::Zero()}, 0.0, 20.0, 0.25, &mask);
  const auto& l = masked.lines[0];
  EXPECT_TRUE(masked.mask_applied);
  EXPECT_EQ(l.termination, Termination::mask_exit);
  EXPECT_LE(l.vertices.back().position.x(), 5.0);
  // prefix of the unmasked trace
  const auto& free = trace(f, {Vec3::Zero()}, 0.0, 20.0, 0.25).lines[0];
  ASSERT_LT(l.vertices.size(), free.vertices.size());
  for (std::size_t i = 0; i < l.vertices.size(); ++i) EXPECT_EQ(l.vertices[i], free.vertices[i]);
}

TEST(Trace, LeavingGridIsDomainExit) {
  const auto f = uniform_field(Vec3(1, 0, 0), -2.0, 6.0);
  const auto& l = trace(f, {Vec3::Zero()}, 0.0, 20.0, 0.5).lines[0];
  EXPECT_EQ(l.termination, Termination::domain_exit);
  EXPECT_LE(l.vertices.back().position.x(), 6.0);
}

TEST(Trace, ZeroFieldStagnates) {
  const auto f = uniform_field(Vec3::Zero());
  const auto& l = trace(f, {Vec3(1, 0, 0)}, 0.0, 100.0, 1.0).lines[0];
  EXPECT_EQ(l.termination, Termination::stagnation);
  EXPECT_EQ(l.vertices.size(), 5u);
}

TEST(Trace, NonPositiveStepRejected) {
  const auto f = uniform_field(Vec3(1, 0, 0));
  try {
    trace(f, {Vec3::Zero()}, 0.0, 10.0, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidStep);
  }
}

TEST(Trace, OutputIndependentOfThreadCount) {
  const auto f = rotation_field();
  std::vector<Vec3> seeds;
  for (int i = 0; i < 40; ++i) seeds.emplace_back(1.0 + 0.2 * i, 0.1 * i, 0.0);
  EmitterSpec e;
  e.start_times = {20.0, 0.0, 10.0};
  const PathlineSet one = trace_emitter(f, seeds, e, 30.0, 0.5, nullptr, {1e-4, 5, 1});
  const PathlineSet four = trace_emitter(f, seeds, e, 30.0, 0.5, nullptr, {1e-4, 5, 4});
  EXPECT_EQ(pathlines_to_binary(one), pathlines_to_binary(four));
  ASSERT_EQ(one.lines.size(), 120u);
  for (std::size_t i = 1; i < one.lines.size(); ++i) {
    const auto& a = one.lines[i - 1];
    const auto& b = one.lines[i];
    EXPECT_TRUE(a.start_time < b.start_time || (a.start_time == b.start_time && a.seed_index < b.seed_index));
  }
}

TEST(Seeds, SingleSeedAtCentroid) {
  const ClosedSplineContour lumen{circle_points(16, 2.0, Vec2(1.0, -0.5)), ContourRole::lumen};
  const auto seeds = seed_from_cross_section(plane_at_origin(), &lumen, 1);
  ASSERT_EQ(seeds.size(), 1u);
  EXPECT_LT((seeds[0] - Vec3(1.0, -0.5, 0.0)).norm(), 1e-9);
}

TEST(Seeds, ThousandSeedsFillCircleUniformly) {
  const ClosedSplineContour lumen{circle_points(32, 3.0), ContourRole::lumen};
  const auto seeds = seed_from_cross_section(plane_at_origin(), &lumen, 1000);
  ASSERT_EQ(seeds.size(), 1000u);
  Vec3 mean = Vec3::Zero();
  int inner = 0;
  for (const Vec3& s : seeds) {
    EXPECT_LE(std::hypot(s.x(), s.y()), 3.0);
    EXPECT_EQ(s.z(), 0.0);
    mean += s;
    inner += std::hypot(s.x(), s.y()) < 3.0 / std::sqrt(2.0);
  }
  mean /= 1000.0;
  EXPECT_LT(mean.norm(), 0.1);
  // half the area lies within r / sqrt(2)
  EXPECT_NEAR(inner, 500, 30);
  EXPECT_EQ(seeds, seed_from_cross_section(plane_at_origin(), &lumen, 1000));
}

TEST(Seeds, DiscWithoutLumenAndDegenerateLumen) {
  const auto seeds = seed_from_cross_section(plane_at_origin(), nullptr, 200);
  for (const Vec3& s : seeds) EXPECT_LE(s.norm(), 3.0 + 1e-12);
  const ClosedSplineContour flat{{Vec2(0, 0), Vec2(1, 0), Vec2(2, 0)}, ContourRole::lumen};
  try {
    seed_from_cross_section(plane_at_origin(), &flat, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyLumen);
  }
}

TEST(Stats, ThresholdFractions) {
  const auto slow = uniform_field(Vec3(0.9, 0, 0));
  EXPECT_EQ(pathline_stats(trace(slow, {Vec3::Zero()}, 0, 10, 1)).fraction_above, 0.0);
  const auto fast = uniform_field(Vec3(1.2, 0, 0));
  const PathlineStats s = pathline_stats(trace(fast, {Vec3::Zero(), Vec3(1, 1, 0)}, 0, 10, 1));
  EXPECT_EQ(s.fraction_above, 1.0);
  EXPECT_NEAR(s.max_speed, 1.2, 1e-12);
  EXPECT_EQ(s.per_line_max.size(), 2u);
  const PathlineStats empty = pathline_stats(PathlineSet{});
  EXPECT_EQ(empty.max_speed, 0.0);
  EXPECT_EQ(empty.fraction_above, 0.0);
  EXPECT_EQ(empty.vertex_count, 0u);
}

TEST(Binary, RoundTripAtFloatPrecision) {
  const auto f = rotation_field();
  EmitterSpec e;
  e.plane_id = 7;
  e.start_times = {0.0, 5.0};
  const PathlineSet s = trace_emitter(f, {Vec3(3, 0, 0), Vec3(5, 1, 0), Vec3(11.9, 0, 0)}, e, 40.0, 0.5);
  const std::string bytes = pathlines_to_binary(s);
  EXPECT_EQ(bytes.substr(0, 8), std::string("CPLN\0\1\0\0", 8));
  const PathlineSet back = pathlines_from_binary(bytes);
  EXPECT_EQ(back.dt, s.dt);
  EXPECT_EQ(back.emitter.plane_id, 7);
  EXPECT_EQ(back.emitter.start_times, s.emitter.start_times);
  ASSERT_EQ(back.lines.size(), s.lines.size());
  for (std::size_t i = 0; i < s.lines.size(); ++i) {
    EXPECT_EQ(back.lines[i].termination, s.lines[i].termination);
    EXPECT_EQ(back.lines[i].seed_index, s.lines[i].seed_index);
    ASSERT_EQ(back.lines[i].vertices.size(), s.lines[i].vertices.size());
    for (std::size_t k = 0; k < s.lines[i].vertices.size(); ++k) {
      EXPECT_EQ(back.lines[i].vertices[k].position.x(), static_cast<float>(s.lines[i].vertices[k].position.x()));
      EXPECT_EQ(back.lines[i].vertices[k].speed, static_cast<float>(s.lines[i].vertices[k].speed));
    }
  }
  EXPECT_EQ(pathlines_to_binary(back), bytes);
  EXPECT_THROW(pathlines_from_binary(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(pathlines_from_binary("XXXX"), Error);
}

TEST(DefaultStep, CflBound) {
  const auto f = make_field({3, 3, 3}, Affine::from_spacing(Vec3(0.5, 0.8, 1.0)),
                            [](const Vec3&) { return Vec3::Zero(); }, 2, 1000.0, 1.5);
  EXPECT_DOUBLE_EQ(default_dt(f), 0.5 * 0.5 / 1.5);
}
