#include "carotid/biomarkers.hpp"
#include "carotid/error.hpp"
#include "carotid/phantom.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace carotid;

namespace {

constexpr double kPi = std::numbers::pi;

PhantomSpec tube(double spacing = 0.5) {
  PhantomSpec s;
  s.kind = PhantomKind::straight_tube;
  s.lumen_radius = 3.0;
  s.wall_thickness = 1.0;
  s.length = 10.0;
  s.voxel_spacing = spacing;
  return s;
}

}  // namespace

TEST(Phantom, StraightTubeWallMaskMatchesAnalyticAnnulus) {
  const PhantomSpec s = tube();
  const Phantom p = generate_phantom(s);
  const auto& d = p.wall_mask.dims();
  int wall = 0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Vec3 w = p.wall_mask.affine().voxel_to_world(Vec3(i, j, k));
        const double r = std::hypot(w.x(), w.y());
        const bool analytic = r > 3.0 && r <= 4.0;
        if (p.wall_mask.at(i, j, k) != analytic) {
          // any disagreement must sit within half a voxel of the annulus boundary
          EXPECT_LT(std::min(std::abs(r - 3.0), std::abs(r - 4.0)), 0.5 * s.voxel_spacing);
        }
        EXPECT_FALSE(p.wall_mask.at(i, j, k) && p.lumen_mask.at(i, j, k));
        wall += p.wall_mask.at(i, j, k);
      }
  // annulus area over voxel area, per slice
  const double expected = kPi * (16.0 - 9.0) / 0.25 * d[2];
  EXPECT_NEAR(wall, expected, 0.05 * expected);
}

TEST(Phantom, IntensitiesAndPartialVolumeRamp) {
  const PhantomSpec s = tube();
  const Phantom p = generate_phantom(s);
  const auto& d = p.bb.dims();
  const int ci = d[0] / 2, cj = d[1] / 2;
  EXPECT_DOUBLE_EQ(p.bb.at(ci, cj, 3), kLumenIntensity);
  EXPECT_DOUBLE_EQ(p.bb.at(0, 0, 3), kBackgroundIntensity);
  // x = 3.5 mm is mid-wall
  EXPECT_DOUBLE_EQ(p.bb.at(ci + 7, cj, 3), kWallIntensity);
  // x = 3.0 mm sits on the lumen boundary: half lumen, half wall
  EXPECT_DOUBLE_EQ(p.bb.at(ci + 6, cj, 3), 0.5 * (kLumenIntensity + kWallIntensity));
}

TEST(Phantom, MasksAreSymmetricUnderQuarterTurns) {
  const Phantom p = generate_phantom(tube());
  const auto& d = p.lumen_mask.dims();
  ASSERT_EQ(d[0], d[1]);
  const int n = d[0];
  for (int k = 0; k < d[2]; k += 4)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        EXPECT_EQ(p.lumen_mask.at(i, j, k), p.lumen_mask.at(n - 1 - j, i, k));
        EXPECT_EQ(p.wall_mask.at(i, j, k), p.wall_mask.at(n - 1 - i, n - 1 - j, k));
      }
}

TEST(Phantom, StenoticTruthIsFiftyPercent) {
  PhantomSpec s = tube();
  s.kind = PhantomKind::stenotic_tube;
  s.min_radius = 1.5;
  s.length = 30.0;
  const Phantom p = generate_phantom(s);
  EXPECT_DOUBLE_EQ(p.truth.stenosis_percent, 50.0);
  EXPECT_DOUBLE_EQ(stenosis_degree(2 * p.truth.min_radius, 2 * p.truth.reference_radius), 50.0);
  EXPECT_DOUBLE_EQ(lumen_radius_at(s, 15.0), 1.5);
  EXPECT_DOUBLE_EQ(lumen_radius_at(s, 5.0), 3.0);
  const auto mn = std::min_element(p.truth.lumen_radius.begin(), p.truth.lumen_radius.end());
  EXPECT_DOUBLE_EQ(*mn, 1.5);
}

TEST(Phantom, InvalidSpecsRejected) {
  PhantomSpec s = tube();
  s.lumen_radius = 0.0;
  try {
    generate_phantom(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpecInvalid);
  }
  s = tube();
  s.timepoints = 1;
  EXPECT_THROW(generate_flow(s), Error);
  EXPECT_THROW(phantom_spec_from_json(Json{{"bogus", 1}}), Error);
}

TEST(PhantomFlow, PeakOnAxisAndHalfAtRadiusOverRootTwo) {
  PhantomSpec s = tube();
  s.lumen_radius = 2.0 * std::sqrt(2.0);  // R / sqrt(2) = 2 mm lands on a voxel center
  const VelocityField f = generate_flow(s);
  EXPECT_DOUBLE_EQ(f.venc(), 1.5 * s.v_max);
  const double t = systole_time(s);
  EXPECT_NEAR(f.sample(Vec3(0, 0, 5), t)->norm(), s.v_max, 1e-12);
  EXPECT_NEAR(f.sample(Vec3(2.0, 0, 5), t)->z(), 0.5 * s.v_max, 1e-6);
  EXPECT_NEAR(f.sample(Vec3(0, -2.0, 5), t)->z(), 0.5 * s.v_max, 1e-6);
  EXPECT_EQ(f.sample(Vec3(3.5, 0, 5), t)->norm(), 0.0);
}

TEST(PhantomFlow, FlatWaveformFramesIdentical) {
  PhantomSpec s = tube(1.0);
  s.waveform = WaveformKind::flat;
  s.timepoints = 4;
  const VelocityField f = generate_flow(s);
  const std::size_t n = voxel_count(f.dims());
  for (int a = 0; a < 3; ++a)
    for (int fr = 1; fr < 4; ++fr)
      EXPECT_TRUE(std::equal(f.components()[a].begin(), f.components()[a].begin() + n,
                             f.components()[a].begin() + fr * n));
}

TEST(PhantomFlow, CrossSectionFlowEqualsPoiseuilleMean) {
  PhantomSpec s = tube(0.25);
  s.length = 4.0;
  s.timepoints = 8;
  const VelocityField f = generate_flow(s);
  CrossSectionPlane plane;
  plane.center = Vec3(0, 0, 2.0);
  plane.frame = {Vec3::UnitZ(), Vec3::UnitX(), Vec3::UnitY()};
  plane.fov = 10.0;
  plane.in_plane_spacing = 0.1;
  std::vector<Vec2> seeds;
  for (int k = 0; k < 64; ++k) seeds.emplace_back(3.0 * std::cos(2 * kPi * k / 64), 3.0 * std::sin(2 * kPi * k / 64));
  const ClosedSplineContour lumen{seeds, ContourRole::lumen};
  for (double t : {125.0, 250.0, 375.0}) {
    const double expected = kPi * 9.0 * s.v_max / 2.0 * waveform_value(s, t);
    EXPECT_NEAR(flow_rate(plane, lumen, f, t), expected, 0.02 * expected) << t;
  }
}

TEST(PhantomFlow, PulseDelayFollowsPwv) {
  PhantomSpec s = tube(1.0);
  s.length = 20.0;
  s.pwv = 5.0;  // 4 ms delay over 20 mm
  EXPECT_DOUBLE_EQ(waveform_value(s, 254.0, 20.0), waveform_value(s, 250.0, 0.0));
}

TEST(Phantom, BifurcationHasTwoBranches) {
  PhantomSpec s;
  s.kind = PhantomKind::bifurcation;
  s.length = 30.0;
  s.voxel_spacing = 0.5;
  s.timepoints = 2;
  const Phantom p = generate_phantom(s);
  ASSERT_EQ(p.truth.centerlines.size(), 2u);
  EXPECT_EQ(p.truth.centerlines[1].branch(), Branch::ECA);
  for (const auto& c : p.truth.centerlines) {
    for (double a = 0.0; a < c.length() - s.ica_radius; a += 1.0) {
      EXPECT_TRUE(*p.lumen_mask.sample(c.point_at(a))) << a;
    }
  }
  const VelocityField f = generate_flow(s);
  const Vec3 v = *f.sample(p.truth.centerlines[1].point_at(p.truth.centerlines[1].length() - 5.0), 250.0);
  EXPECT_LT(v.x(), 0.0);  // ECA heads towards -x
}

TEST(Phantom, SpecJsonRoundTrip) {
  PhantomSpec s;
  s.kind = PhantomKind::stenotic_tube;
  s.waveform = WaveformKind::flat;
  s.pwv = 7.5;
  s.timepoints = 12;
  EXPECT_EQ(phantom_spec_from_json(to_json(s)), s);
}
