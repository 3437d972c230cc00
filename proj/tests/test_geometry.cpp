#include <gtest/gtest.h>

#include <cmath>

#include "splitot/geometry.hpp"

using namespace splitot;

namespace {

CostModel exp_foliated() {
  return costs::foliated("exp((x1+2x2)y)", {1.0, 2.0}, costs::exp_product(), domains::unit_square(), {0.0, 1.0});
}

}  // namespace

TEST(TangentDirection, IsUnitAndOrthogonalToMixedGradient) {
  const Vec2 t = tangent_direction(costs::bilinear(), {0.3, 0.4}, 0.5);
  EXPECT_NEAR(t.x1, 1.0, 1e-15);
  EXPECT_NEAR(t.x2, 0.0, 1e-15);
  const Vec2 q = tangent_direction(costs::quarter_disk(), {0.3, 0.4}, 0.5);
  EXPECT_NEAR(norm(q), 1.0, 1e-15);
  EXPECT_NEAR(dot(q, grad_x_dcdy(costs::quarter_disk(), {0.3, 0.4}, 0.5)), 0.0, 1e-15);
  EXPECT_GE(q.x1, 0.0);
}

TEST(TangentDirection, BuiltinExamples) {
  const Vec2 q = tangent_direction(costs::quarter_disk(), {0.4, 0.3}, kPi / 3);
  EXPECT_NEAR(q.x1, 0.5, 1e-12);
  EXPECT_NEAR(q.x2, std::sqrt(3.0) / 2, 1e-12);
  const Vec2 s = tangent_direction(costs::separable_quadratic(), {0.5, 0.5}, 0.3);
  EXPECT_NEAR(s.x1, 0.0, 1e-15);
  EXPECT_NEAR(s.x2, 1.0, 1e-15);
}

TEST(TangentDirection, DegeneratePointThrows) {
  const CostModel flat("x2 y^2", [](Point2 x, double y) { return x.x2 * y * y; }, domains::unit_square(), {0.0, 1.0});
  EXPECT_THROW(tangent_direction(flat, {0.5, 0.5}, 0.0), DegeneratePoint);
}

TEST(CLinearity, FoliatedCostsHaveNoDefect) {
  for (Point2 x : {Point2{0.1, 0.2}, Point2{0.5, 0.5}, Point2{0.9, 0.7}}) {
    EXPECT_LE(c_linearity_defect(costs::bilinear(), x), 1e-12);
    EXPECT_LE(c_linearity_defect(exp_foliated(), x), 1e-6);
    EXPECT_LE(c_linearity_defect(costs::separable_quadratic(), x), 1e-12);
  }
}

TEST(CLinearity, QuarterDiskTangentRotatesWithY) {
  // The tangent of L_x(y) is (cos y, sin y), so it sweeps exactly |Y|.
  EXPECT_NEAR(c_linearity_defect(costs::quarter_disk(), {0.3, 0.4}), kPi / 2, 1e-9);
  EXPECT_NEAR(c_linearity_defect(costs::quarter_disk(), {0.3, 0.4}, Interval{0.2, 0.5}, 8), 0.3, 1e-9);
}

TEST(CLinearity, FiniteDifferenceCostAgrees) {
  const CostModel fd = exp_foliated().finite_difference_only();
  EXPECT_LE(c_linearity_defect(fd, {0.4, 0.4}), 1e-6);
}

TEST(CConvexity, SegmentImagesAreConvex) {
  for (const CostModel& c : {costs::bilinear(), costs::separable_quadratic(), exp_foliated()}) {
    const auto v = c_convexity_check(c, {0.4, 0.3});
    EXPECT_TRUE(v.convex) << c.name();
    EXPECT_TRUE(v.monotone) << c.name();
  }
}

TEST(CConvexity, QuarterDiskArcIsRejected) {
  const auto v = c_convexity_check(costs::quarter_disk(), {0.4, 0.3});
  EXPECT_FALSE(v.convex);
  // Sagitta over chord of a quarter circle: (1 - cos(pi/4)) / (2 sin(pi/4)) relative to the chord,
  // measured here against the least-squares line, so only a lower bound is asserted.
  EXPECT_GT(v.linearity_defect, 0.05);
}

TEST(CConvexity, NonMonotoneImageIsRejected) {
  // D_x c = (0, (y - 1/2)^2): a segment traversed back and forth.
  CostPartials d;
  d.grad_x = [](Point2, double y) { return Vec2{0.0, (y - 0.5) * (y - 0.5)}; };
  const CostModel c("fold", [](Point2 x, double y) { return x.x2 * (y - 0.5) * (y - 0.5); }, domains::unit_square(),
                    {0.0, 1.0}, d);
  const auto v = c_convexity_check(c, {0.5, 0.5});
  EXPECT_FALSE(v.monotone);
  EXPECT_FALSE(v.convex);
}

TEST(PSet, PivotPointsOfQuarterDisk) {
  EXPECT_TRUE(p_set_membership(costs::quarter_disk(), {0.0, 0.0}).member);
  const CostModel quarter = costs::quarter_disk(domains::quarter_disk(), {0.0, kPi / 4});
  const auto m = p_set_membership(quarter, {0.0, 0.5});
  EXPECT_TRUE(m.member);
  EXPECT_EQ(m.pairs, 105u);
}

TEST(PSet, InteriorPointOfQuarterDiskIsNotMember) {
  // For x = (0.5, 0.2) the leaf L_x(y0) crosses the ray through x, and points
  // beyond x violate the ordering for y1 > y0.
  const auto m = p_set_membership(costs::quarter_disk(), {0.5, 0.2});
  EXPECT_FALSE(m.member);
  EXPECT_GT(m.worst_violation, 1e-3);
}

TEST(Mcp, BilinearThinIntervalHoldsOnFineGrid) {
  const auto mu = SourceMeasure::uniform(domains::unit_square(), 2500);
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  const auto r = mcp_check(costs::bilinear(), mu, nu, {0.5, 0.5}, 0.4, 0.401);
  EXPECT_TRUE(r.holds);
  EXPECT_NEAR(r.band_mass, 0.0, 1e-12);
  EXPECT_NEAR(r.nu_mass, 0.001, 1e-9);
  EXPECT_NEAR(r.slack, 8e-4, 1e-15);
}

TEST(Mcp, FailsAtQuarterDiskOrigin) {
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 400);
  const auto nu = TargetMeasure::uniform({0.0, kPi / 2});
  const auto r = mcp_check(costs::quarter_disk(), mu, nu, {0.0, 0.0}, 0.3, 0.6);
  EXPECT_FALSE(r.holds);
  // The band is the sector between the two rays: mass 0.3 / (pi/2), the same as nu.
  EXPECT_NEAR(r.band_mass, 0.3 / (kPi / 2), 2e-3);
  EXPECT_GE(r.band_mass, r.nu_mass - r.slack);
}

TEST(Mcp, HoldsAtRestrictedQuarterDiskPivot) {
  const Interval Y{0.0, kPi / 4};
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 400);
  const auto nu = TargetMeasure::uniform(Y);
  const CostModel c = costs::quarter_disk(domains::quarter_disk(), Y);
  for (int k = 0; k < 4; ++k) {
    const double a = Y.length() * k / 4, b = Y.length() * (k + 1) / 4;
    EXPECT_TRUE(mcp_check(c, mu, nu, {0.0, 0.5}, a, b).holds) << k;
  }
}

TEST(Mcp, RejectsBadArguments) {
  const auto mu = SourceMeasure::uniform(domains::unit_square(), 20);
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  EXPECT_THROW(mcp_check(costs::bilinear(), mu, nu, {0.5, 0.5}, 0.6, 0.4), ConfigError);
  EXPECT_THROW(mcp_check(costs::bilinear(), mu, nu, {1.5, 0.5}, 0.4, 0.6), OutOfDomain);
}

TEST(Foliation, ReportSummarisesSamples) {
  const std::vector<Point2> pts{{0.2, 0.2}, {0.5, 0.5}, {0.7, 0.1}};
  const auto a = foliation_report(costs::bilinear(), pts);
  EXPECT_EQ(a.samples.size(), 3u);
  EXPECT_LE(a.max_c_linearity_defect, 1e-12);
  EXPECT_TRUE(a.all_convex);
  EXPECT_FALSE(a.disconnected_level_sets);
  const auto b = foliation_report(costs::quarter_disk(), pts);
  EXPECT_GT(b.max_c_linearity_defect, 1.0);
  EXPECT_FALSE(b.all_convex);
}
