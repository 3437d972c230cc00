#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "splitot/splitting.hpp"

using namespace splitot;

namespace {

SplittingProblem square(const CostModel& c, int n = 100) {
  return SplittingProblem(c, SourceMeasure::uniform(domains::unit_square(), n), TargetMeasure::uniform(c.y_range()),
                          128);
}

SplittingProblem quarter_disk(int n = 200) {
  return SplittingProblem(costs::quarter_disk(), SourceMeasure::uniform(domains::quarter_disk(), n),
                          TargetMeasure::uniform({0.0, kPi / 2}), 256);
}

}  // namespace

TEST(SplittingProblem, RejectsMismatchedTarget) {
  EXPECT_THROW(SplittingProblem(costs::bilinear(), SourceMeasure::uniform(domains::unit_square(), 10),
                                TargetMeasure::uniform({0.0, 2.0})),
               ConfigError);
  EXPECT_THROW(SplittingProblem(costs::bilinear(), SourceMeasure::uniform(domains::unit_square(), 10),
                                TargetMeasure::uniform({0.0, 1.0}), 1),
               ConfigError);
  const auto sp = square(costs::bilinear(), 50);
  EXPECT_DOUBLE_EQ(sp.mass_tolerance(), 2.0 / 50);
  EXPECT_EQ(sp.scan_ys().size(), 128u);
}

TEST(SplittingFunction, BracketsZeroOnEveryScenario) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const SplittingProblem& sp : {square(costs::bilinear(), 40), square(costs::separable_quadratic(), 40),
                                     quarter_disk(40)}) {
    const Interval& Y = sp.cost().y_range();
    for (int k = 0; k < 20; ++k) {
      const Point2 x{0.7 * u(rng), 0.7 * u(rng)};
      EXPECT_GE(splitting_function(sp, x, Y.lo), 0.0);
      EXPECT_LE(splitting_function(sp, x, Y.hi), 1e-12);
    }
  }
}

TEST(SplittingFunction, VanishesAtKnownSplits) {
  const auto qd = quarter_disk();
  EXPECT_NEAR(splitting_function(qd, {0.3, 0.3}, kPi / 4), 0.0, qd.mass_tolerance());
  const auto sep = square(costs::separable_quadratic());
  EXPECT_NEAR(splitting_function(sep, {0.7, 0.2}, 0.7), 0.0, sep.mass_tolerance());
  const auto bil = square(costs::bilinear());
  EXPECT_NEAR(splitting_function(bil, {0.3, 0.4}, 0.6), 0.0, bil.mass_tolerance());
  EXPECT_THROW(splitting_function(bil, {0.3, 0.4}, 1.5), OutOfDomain);
}

TEST(OptimalMap, QuarterDiskIsPolarAngle) {
  const auto sp = quarter_disk();
  EXPECT_NEAR(optimal_map(sp, {0.3, 0.3}), kPi / 4, 5e-3);
  EXPECT_NEAR(optimal_map(sp, {0.3, 0.1}), std::atan(1.0 / 3.0), 5e-3);
  EXPECT_NEAR(optimal_map(sp, {0.1, 0.6}), std::atan(6.0), 5e-3);
}

TEST(OptimalMap, SeparableIsIdentityAndBilinearIsReflection) {
  const auto sep = square(costs::separable_quadratic());
  const auto bil = square(costs::bilinear());
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (int k = 0; k < 20; ++k) {
    const Point2 x{u(rng), u(rng)};
    EXPECT_NEAR(optimal_map(sep, x), x.x1, 1e-2);
    EXPECT_NEAR(optimal_map(bil, x), 1.0 - x.x2, 1e-2);
  }
}

TEST(OptimalMap, BatchedScanAgreesWithDirectSummation) {
  for (const SplittingProblem& sp : {quarter_disk(80), square(costs::bilinear(), 60)}) {
    std::vector<Point2> pts;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 0.7);
    while (pts.size() < 24) {
      const Point2 x{u(rng), u(rng)};
      if (sp.cost().domain().contains(x)) pts.push_back(x);
    }
    const auto batch = optimal_map_batch(sp, pts);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const auto one = optimal_map_value(sp, pts[k]);
      EXPECT_NEAR(batch[k].y, one.y, 1e-5) << k;
      EXPECT_EQ(batch[k].flags, one.flags) << k;
    }
  }
}

TEST(OptimalMap, ClampsNearTheTopOfTheSquare) {
  // f_x(y) = 1 - x2 - y stays below 2/N for x2 close to one.
  const auto sp = square(costs::bilinear());
  const auto v = optimal_map_value(sp, {0.5, 0.999});
  EXPECT_TRUE(v.flags & kClampLow);
  EXPECT_DOUBLE_EQ(v.y, 0.0);
  EXPECT_EQ(optimal_map_batch(sp, {}).size(), 0u);
}

TEST(OptimalMap, SingleSignChangeOnBuiltins) {
  // N = 128 keeps the grid points off the cell centres.
  const auto sp = square(costs::separable_quadratic(), 128);
  const auto field = map_field(sp, 20);
  EXPECT_EQ(field.points.size(), 400u);
  EXPECT_EQ(field.flagged(), 0u);
  for (const auto& v : field.values) EXPECT_EQ(v.sign_changes, 1);
}

TEST(CountSignChanges, Hysteresis) {
  const std::vector<double> f{0.5, 0.2, 0.001, -0.001, 0.001, -0.3};
  EXPECT_EQ(detail::count_sign_changes(f, 0.01), 1);
  EXPECT_EQ(detail::count_sign_changes(f, 0.0), 3);
  const std::vector<double> g{0.5, -0.5, 0.5, -0.5};
  EXPECT_EQ(detail::count_sign_changes(g, 0.01), 3);
}

TEST(SplitLevel, BilinearThresholdIsHorizontalLine) {
  const auto sp = square(costs::bilinear());
  const auto s = split_level(sp, 0.3, 128);
  EXPECT_NEAR(s.lambda, 0.7, 1e-2);
  EXPECT_LE(s.mass_error, sp.mass_tolerance());
  ASSERT_TRUE(s.curve.has_value());
  EXPECT_NEAR(s.curve->length(), 1.0, 1e-9);
  EXPECT_THROW(split_level(sp, -0.1), OutOfDomain);
}

TEST(SplitLevel, QuarterDiskThresholdIsDiagonal) {
  const auto sp = quarter_disk();
  const auto s = split_level(sp, kPi / 4, 256);
  EXPECT_NEAR(s.lambda, 0.0, 1e-2);
  ASSERT_TRUE(s.curve.has_value());
  for (const auto& v : s.curve->vertices()) EXPECT_NEAR(v.x1, v.x2, 1e-2);
}

TEST(MapField, ModulusOfIdentityMap) {
  const auto field = map_field(square(costs::separable_quadratic()), 20);
  EXPECT_NEAR(field.modulus, 1.0 / 20, 1e-2);
  const auto part = map_field(square(costs::separable_quadratic()), 10, [](Point2 x) { return x.x1 < 0.5; });
  EXPECT_EQ(part.points.size(), 50u);
  EXPECT_EQ(part.at(7, 3), -1);
}

TEST(Pushforward, KsSmallForSplittingMapAndLargeForConstant) {
  const auto sp = square(costs::bilinear());
  const auto field = map_field(sp, 30);
  EXPECT_LE(verify_pushforward(sp, field), 0.03);

  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  const std::vector<double> ys(100, 0.5), ws(100, 1.0);
  EXPECT_NEAR(ks_distance(ys, ws, nu), 0.5, 1e-12);
  EXPECT_GT(ks_distance(ys, ws, nu), 0.4);
  EXPECT_THROW(ks_distance(ys, std::vector<double>(3, 1.0), nu), ConfigError);
}

TEST(Pushforward, KsAgainstExactQuantiles) {
  // Points at the quantiles (k + 1/2)/n of nu: KS is exactly 1/(2n).
  const TargetMeasure nu({0.0, 1.0}, [](double y) { return 2 * y; });
  const int n = 50;
  std::vector<double> ys(n), ws(n, 1.0);
  for (int k = 0; k < n; ++k) ys[k] = std::sqrt((k + 0.5) / n);
  EXPECT_NEAR(ks_distance(ys, ws, nu), 0.5 / n, 1e-6);
}

TEST(SupportMonotonicity, NoFailuresForSplittingMap) {
  const auto sp = square(costs::separable_quadratic());
  const auto field = map_field(sp, 15);
  EXPECT_EQ(support_monotonicity_failure_rate(sp, field, 500), 0.0);
}

TEST(MapField, CsvColumns) {
  const auto field = map_field(square(costs::bilinear(), 20), 4);
  std::ostringstream os;
  write_map_csv(os, field);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("x1,x2,F,residual,flags\n", 0), 0u);
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 17);
}

TEST(SplitLevel, ThresholdNearLowerEndIsMaximalDerivative) {
  // No target mass below a: the superlevel set is empty and lambda is max dc/dy.
  const auto sp = square(costs::bilinear());
  const auto s = split_level(sp, 1e-6, 64);
  EXPECT_NEAR(s.lambda, 1.0, 1e-2);
  EXPECT_LE(s.mass_error, sp.mass_tolerance());
}
