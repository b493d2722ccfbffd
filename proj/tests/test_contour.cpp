#include "carotid/contour.hpp"
#include "carotid/error.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace carotid;
using carotid::testing::circle_points;

namespace {

constexpr double kPi = std::numbers::pi;

ClosedSplineContour circle_contour(int n, double r, Vec2 c = Vec2::Zero(),
                                   ContourRole role = ContourRole::lumen) {
  return {circle_points(n, r, c), role};
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected carotid::Error";
  return ErrorCode::InvalidArgument;
}

double point_to_polyline(const Vec2& p, const Polyline2& poly) { return distance_to_polygon(poly, p); }

// Symmetric Hausdorff distance between two closed polylines, vertex-to-edge in both directions.
double hausdorff(const Polyline2& a, const Polyline2& b) {
  double h = 0.0;
  for (const Vec2& p : a) h = std::max(h, point_to_polyline(p, b));
  for (const Vec2& p : b) h = std::max(h, point_to_polyline(p, a));
  return h;
}

Mask2D disc_mask(const PlaneGrid& g, Vec2 c, double r) {
  Mask2D m(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) m.set(i, j, (g.pixel_center(i, j) - c).norm() <= r);
  return m;
}

}  // namespace

TEST(EvaluateContour, SquareSeedsAppearExactly) {
  const ClosedSplineContour sq{{Vec2(0, 0), Vec2(4, 0), Vec2(4, 4), Vec2(0, 4)}, ContourRole::lumen};
  const Polyline2 dense = evaluate_contour(sq, 10);
  ASSERT_EQ(dense.size(), 40u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ((dense[k * 10] - sq.seeds[k]).norm(), 0.0);
}

TEST(EvaluateContour, EightSeedCircleStaysWithinTwoTenthsMillimetre) {
  const Polyline2 dense = evaluate_contour(circle_contour(8, 10.0), 200);
  double worst = 0.0;
  for (const Vec2& p : dense) worst = std::max(worst, std::abs(p.norm() - 10.0));
  EXPECT_LE(worst, 0.2);
  EXPECT_GT(worst, 0.0);
}

TEST(EvaluateContour, PassesThroughRandomSeeds) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    ClosedSplineContour c = circle_contour(5 + trial % 7, 6.0);
    for (Vec2& s : c.seeds) s += Vec2(jitter(rng), jitter(rng));
    const Polyline2 dense = evaluate_contour(c, 7);
    for (std::size_t k = 0; k < c.seeds.size(); ++k) EXPECT_LT((dense[k * 7] - c.seeds[k]).norm(), 1e-9);
  }
}

TEST(EvaluateContour, RepeatedSeedDoesNotProduceNaN) {
  const ClosedSplineContour c{{Vec2(0, 0), Vec2(0, 0), Vec2(3, 0), Vec2(0, 3)}, ContourRole::lumen};
  for (const Vec2& p : evaluate_contour(c, 8)) EXPECT_TRUE(p.allFinite());
}

TEST(EvaluateContour, TwoSeedsRejected) {
  const ClosedSplineContour c{{Vec2(0, 0), Vec2(1, 0)}, ContourRole::lumen};
  EXPECT_EQ(code_of([&] { evaluate_contour(c, 4); }), ErrorCode::TooFewSeeds);
}

TEST(ApplyEdit, MoveThenMoveBackRestoresAnnotation) {
  SliceAnnotation a;
  a.plane_id = 3;
  a.lumen = circle_contour(6, 3.0);
  a.wall = circle_contour(6, 4.5, Vec2::Zero(), ContourRole::outer_wall);
  const Vec2 original = a.wall->seeds[2];
  const SliceAnnotation moved = apply_edit(a, edit::MoveSeed{ContourRole::outer_wall, 2, Vec2(-3, 4)});
  EXPECT_NE(moved, a);
  EXPECT_EQ(a.wall->seeds[2], original);  // input untouched
  EXPECT_EQ(apply_edit(moved, edit::MoveSeed{ContourRole::outer_wall, 2, original}), a);
}

TEST(ApplyEdit, AddingSeedOnCurveBarelyChangesIt) {
  SliceAnnotation a;
  a.lumen = circle_contour(12, 4.0);
  const Polyline2 before = evaluate_contour(*a.lumen, kDenseSamples);
  // a point lying on the densified curve midway along segment 2
  const Vec2 on_curve = evaluate_contour(*a.lumen, 2)[2 * 2 + 1];
  const SliceAnnotation b = apply_edit(a, edit::AddSeed{ContourRole::lumen, on_curve});
  ASSERT_EQ(b.lumen->seeds.size(), 13u);
  EXPECT_EQ(b.lumen->seeds[3], on_curve);
  const Polyline2 after = evaluate_contour(*b.lumen, kDenseSamples);
  EXPECT_LT(hausdorff(before, after), 0.05);
}

TEST(ApplyEdit, RemoveFromThreeSeedsRejected) {
  SliceAnnotation a;
  a.lumen = circle_contour(3, 2.0);
  EXPECT_EQ(code_of([&] { apply_edit(a, edit::RemoveSeed{ContourRole::lumen, 0}); }),
            ErrorCode::MinimumSeeds);
}

TEST(ApplyEdit, IndexOutOfRangeAndMissingContour) {
  SliceAnnotation a;
  a.lumen = circle_contour(4, 2.0);
  EXPECT_EQ(code_of([&] { apply_edit(a, edit::MoveSeed{ContourRole::lumen, 4, Vec2(0, 0)}); }),
            ErrorCode::IndexOutOfRange);
  EXPECT_EQ(code_of([&] { apply_edit(a, edit::RemoveSeed{ContourRole::outer_wall, 0}); }),
            ErrorCode::IndexOutOfRange);
}

TEST(ApplyEdit, EditingAutomaticContourMarksCorrected) {
  SliceAnnotation a;
  a.lumen = circle_contour(5, 2.0);
  a.source = AnnotationSource::automatic;
  const SliceAnnotation b = apply_edit(a, edit::RemoveSeed{ContourRole::lumen, 1});
  EXPECT_EQ(b.source, AnnotationSource::auto_corrected);
  EXPECT_EQ(b.lumen->seeds.size(), 4u);
  const SliceAnnotation t = apply_edit(a, edit::ToggleUsable{});
  EXPECT_FALSE(t.usable);
  EXPECT_EQ(t.source, AnnotationSource::automatic);
  EXPECT_EQ(apply_edit(t, edit::ToggleUsable{}), a);
}

TEST(ContourArea, SixtyFourSeedCircle) {
  EXPECT_NEAR(contour_area(circle_contour(64, 10.0)), 100.0 * kPi, 0.005 * 100.0 * kPi);
}

TEST(ContourArea, InvariantUnderOrderRotationReversalAndRigidMotion) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ClosedSplineContour c = circle_contour(9, 5.0);
  for (Vec2& s : c.seeds) s += Vec2(u(rng), u(rng));
  const double area = contour_area(c);
  const Vec2 centroid = contour_centroid(c);

  ClosedSplineContour rotated_order = c;
  std::rotate(rotated_order.seeds.begin(), rotated_order.seeds.begin() + 4, rotated_order.seeds.end());
  EXPECT_NEAR(contour_area(rotated_order), area, 1e-9 * area);

  ClosedSplineContour reversed = c;
  std::reverse(reversed.seeds.begin(), reversed.seeds.end());
  EXPECT_NEAR(contour_area(reversed), area, 1e-9 * area);

  const Eigen::Rotation2Dd rot(0.7);
  ClosedSplineContour moved = c;
  for (Vec2& s : moved.seeds) s = rot * s + Vec2(5, 5);
  EXPECT_NEAR(contour_area(moved), area, 1e-9 * area);
  EXPECT_LT((contour_centroid(moved) - (rot * centroid + Vec2(5, 5))).norm(), 1e-9);

  ClosedSplineContour shifted = c;
  for (Vec2& s : shifted.seeds) s += Vec2(5, 5);
  EXPECT_LT((contour_centroid(shifted) - (centroid + Vec2(5, 5))).norm(), 1e-9);
}

TEST(ContourToMask, CirclePixelCountMatchesArea) {
  const PlaneGrid g{60, 60, 0.5};
  const Mask2D m = contour_to_mask(circle_contour(64, 10.0), g);
  EXPECT_NEAR(m.count() * 0.25, 100.0 * kPi, 0.02 * 100.0 * kPi);
}

TEST(ContourToMask, TinyContourBetweenPixelCentersIsEmpty) {
  const PlaneGrid g{10, 10, 1.0};
  const ClosedSplineContour tiny = circle_contour(4, 0.2, Vec2(0.5, 0.5));
  EXPECT_EQ(contour_to_mask(tiny, g).count(), 0u);
}

TEST(ContourToMask, ContourOutsideGridRejected) {
  const PlaneGrid g{10, 10, 1.0};
  EXPECT_EQ(code_of([&] { contour_to_mask(circle_contour(8, 3.0, Vec2(20, 0)), g); }),
            ErrorCode::GridTooSmall);
}

TEST(ContourToMask, PixelCenterInclusionAgreesWithPointInPolygon) {
  const PlaneGrid g{40, 40, 0.3};
  ClosedSplineContour c{{Vec2(-4, -3), Vec2(3.7, -4.1), Vec2(4.2, 2.5), Vec2(0.3, 0.1), Vec2(-3.3, 4.4)},
                        ContourRole::lumen};
  const Polyline2 dense = evaluate_contour(c, kDenseSamples);
  const Mask2D m = contour_to_mask(c, g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) EXPECT_EQ(m.at(i, j), point_in_polygon(dense, g.pixel_center(i, j)));
}

TEST(FitContour, DiscRoundTripDice) {
  const PlaneGrid g{64, 64, 1.0};
  const Mask2D disc = disc_mask(g, Vec2(0.3, -0.2), 10.0);
  const ClosedSplineContour c = fit_contour_to_mask(disc, ContourRole::lumen);
  EXPECT_EQ(c.seeds.size(), 12u);
  EXPECT_GE(dice(contour_to_mask(c, g), disc), 0.98);
}

TEST(FitContour, EllipseAndSquareDiceAboveNinetyFive) {
  const PlaneGrid g{80, 80, 0.5};
  Mask2D ellipse(g), square(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 p = g.pixel_center(i, j);
      ellipse.set(i, j, std::pow(p.x() / 12.0, 2) + std::pow(p.y() / 7.0, 2) <= 1.0);
      square.set(i, j, std::abs(p.x()) <= 8.0 && std::abs(p.y()) <= 8.0);
    }
  EXPECT_GE(dice(contour_to_mask(fit_contour_to_mask(ellipse, ContourRole::outer_wall, {24}), g), ellipse), 0.95);
  EXPECT_GE(dice(contour_to_mask(fit_contour_to_mask(square, ContourRole::lumen, {16}), g), square), 0.95);
}

TEST(FitContour, FollowsLargerComponentOnly) {
  const PlaneGrid g{64, 64, 1.0};
  Mask2D m = disc_mask(g, Vec2(-12, 0), 9.0);
  const Mask2D small = disc_mask(g, Vec2(14, 5), 5.0);
  for (std::size_t p = 0; p < m.bits.size(); ++p) m.bits[p] |= small.bits[p];
  const ClosedSplineContour c = fit_contour_to_mask(m, ContourRole::lumen);
  for (const Vec2& s : c.seeds) EXPECT_LT((s - Vec2(-12, 0)).norm(), 10.5);
  EXPECT_NEAR(contour_centroid(c).x(), -12.0, 0.3);
}

TEST(FitContour, EmptyAndTinyMasksRejected) {
  const PlaneGrid g{16, 16, 1.0};
  Mask2D m(g);
  EXPECT_EQ(code_of([&] { fit_contour_to_mask(m, ContourRole::lumen); }), ErrorCode::EmptyMask);
  m.set(3, 3, true);
  m.set(4, 3, true);
  EXPECT_EQ(code_of([&] { fit_contour_to_mask(m, ContourRole::lumen); }), ErrorCode::ComponentTooSmall);
}

TEST(FitContour, FitRasterizeFitIsDiceStable) {
  const PlaneGrid g{72, 72, 0.5};
  Mask2D m(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const Vec2 p = g.pixel_center(i, j);
      const double a = std::atan2(p.y(), p.x());
      m.set(i, j, p.norm() <= 9.0 + 0.6 * std::cos(3 * a));
    }
  const ClosedSplineContour first = fit_contour_to_mask(m, ContourRole::lumen);
  const Mask2D r1 = contour_to_mask(first, g);
  const ClosedSplineContour second = fit_contour_to_mask(r1, ContourRole::lumen);
  const Mask2D r2 = contour_to_mask(second, g);
  EXPECT_NEAR(dice(r2, m), dice(r1, m), 0.005);
  EXPECT_GE(dice(r1, r2), 0.995);
}

TEST(FitContour, SeedsAreCounterClockwiseAndEvenlySpaced) {
  const PlaneGrid g{48, 48, 1.0};
  const ClosedSplineContour c = fit_contour_to_mask(disc_mask(g, Vec2::Zero(), 12.0), ContourRole::lumen);
  EXPECT_GT(polygon_signed_area(c.seeds), 0.0);
  double lo = 1e9, hi = 0.0;
  for (std::size_t k = 0; k < c.seeds.size(); ++k) {
    const double d = (c.seeds[(k + 1) % c.seeds.size()] - c.seeds[k]).norm();
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  EXPECT_LT(hi - lo, 0.2 * hi);
}

TEST(TraceBoundary, SingleRowOfPixels) {
  const PlaneGrid g{8, 5, 1.0};
  Mask2D m(g);
  for (int i = 2; i <= 5; ++i) m.set(i, 2, true);
  const Polyline2 b = trace_boundary(m);
  // out along the row and back again
  EXPECT_EQ(b.size(), 6u);
  EXPECT_EQ(b.front(), g.pixel_center(2, 2));
}

TEST(FillHoles, AnnulusBecomesDisc) {
  const PlaneGrid g{40, 40, 1.0};
  Mask2D ring = disc_mask(g, Vec2::Zero(), 12.0);
  const Mask2D hole = disc_mask(g, Vec2::Zero(), 6.0);
  for (std::size_t p = 0; p < ring.bits.size(); ++p) ring.bits[p] &= !hole.bits[p];
  EXPECT_EQ(fill_holes(ring).bits, disc_mask(g, Vec2::Zero(), 12.0).bits);
}

TEST(Validate, ConcentricCirclesAreValid) {
  SliceAnnotation a;
  a.lumen = circle_contour(10, 3.0);
  a.wall = circle_contour(10, 4.0, Vec2::Zero(), ContourRole::outer_wall);
  EXPECT_TRUE(validate_annotation(a).empty());
}

TEST(Validate, LumenEqualToWallRejected) {
  SliceAnnotation a;
  a.lumen = circle_contour(10, 3.0);
  a.wall = circle_contour(10, 3.0, Vec2::Zero(), ContourRole::outer_wall);
  const auto report = validate_annotation(a);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].message, "lumen not strictly inside wall");
}

TEST(Validate, FigureEightIsSelfIntersecting) {
  SliceAnnotation a;
  a.lumen = ClosedSplineContour{{Vec2(-4, -2), Vec2(4, 2), Vec2(4, -2), Vec2(-4, 2)}, ContourRole::lumen};
  const Polyline2 dense = evaluate_contour(*a.lumen, 16);
  // independent oracle: brute-force segment test over all non-adjacent edge pairs
  bool crossing = false;
  const std::size_t n = dense.size();
  for (std::size_t i = 0; i < n && !crossing; ++i)
    for (std::size_t j = i + 2; j < n; ++j) {
      if ((j + 1) % n == i) continue;
      const Vec2 p = dense[i], r = dense[(i + 1) % n] - p;
      const Vec2 q = dense[j], s = dense[(j + 1) % n] - q;
      const double den = r.x() * s.y() - r.y() * s.x();
      if (den == 0.0) continue;
      const double t = ((q - p).x() * s.y() - (q - p).y() * s.x()) / den;
      const double w = ((q - p).x() * r.y() - (q - p).y() * r.x()) / den;
      if (t >= 0 && t <= 1 && w >= 0 && w <= 1) {
        crossing = true;
        break;
      }
    }
  ASSERT_TRUE(crossing);
  const auto report = validate_annotation(a);
  ASSERT_EQ(report.size(), 1u);
  EXPECT_EQ(report[0].message, "self-intersecting contour");
  EXPECT_EQ(report[0].role, "lumen");
}

TEST(Validate, LumenPokingThroughWallRejected) {
  SliceAnnotation a;
  a.lumen = circle_contour(10, 3.0, Vec2(2.0, 0.0));
  a.wall = circle_contour(10, 4.0, Vec2::Zero(), ContourRole::outer_wall);
  EXPECT_FALSE(validate_annotation(a).empty());
  a.usable = false;
  a.lumen.reset();
  EXPECT_TRUE(validate_annotation(a).empty());
}

TEST(Names, RoundTrip) {
  for (auto r : {ContourRole::lumen, ContourRole::outer_wall})
    EXPECT_EQ(contour_role_from_string(to_string(r)), r);
  for (auto s : {AnnotationSource::manual, AnnotationSource::automatic, AnnotationSource::auto_corrected})
    EXPECT_EQ(annotation_source_from_string(to_string(s)), s);
}
