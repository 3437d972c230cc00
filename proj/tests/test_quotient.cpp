#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "splitot/quotient.hpp"

using namespace splitot;

namespace {

CostModel exp_foliated() {
  return costs::foliated("exp((x1+2x2)y)", {1.0, 2.0}, costs::exp_product(), domains::unit_square(), {0.0, 1.0});
}

// Area of the shelf by composite Simpson on its profile.
double shelf_area_simpson(int n = 4000) {
  double s = domains::shelf_profile(0.0) + domains::shelf_profile(1.0);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * domains::shelf_profile(static_cast<double>(k) / n);
  return 2.0 + s / (3.0 * n);
}

const QuotientStructure& bilinear_qs() {
  static const SourceMeasure mu = SourceMeasure::uniform(domains::unit_square(), 100);
  static const QuotientStructure qs = [] {
    QuotientOptions opt;
    opt.curve_resolution = 128;
    opt.z_grid = 128;
    return build_quotient(costs::bilinear(), mu, opt);
  }();
  return qs;
}

}  // namespace

TEST(Quotient, BilinearStructure) {
  const auto& qs = bilinear_qs();
  EXPECT_DOUBLE_EQ(qs.y0(), 0.5);
  EXPECT_NEAR(qs.z_range().lo, 0.0, 1e-12);
  EXPECT_NEAR(qs.z_range().hi, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(qs.Q({0.2, 0.37}), 0.37);
  EXPECT_DOUBLE_EQ(qs.JQ({0.2, 0.37}), 1.0);
  for (double z : {0.1, 0.5, 0.9}) {
    EXPECT_NEAR(qs.representative(z).x2, z, 1e-12);
    for (double y : {0.0, 0.3, 1.0}) EXPECT_NEAR(qs.reduced_cost(z, y), z * (y - 0.5), 1e-12);
    EXPECT_NEAR(reduced_cost(qs, z, qs.y0()), 0.0, 1e-15);
    EXPECT_NEAR(qs.h(z), 1.0, 1e-6);
    EXPECT_NEAR(qs.h_cdf(z), z, 1e-6);
  }
  EXPECT_THROW(qs.representative(1.5), OutOfDomain);
}

TEST(Quotient, BilinearPushforwardDensity) {
  const SourceMeasure mu = SourceMeasure::uniform(domains::unit_square(), 100);
  const auto& qs = bilinear_qs();
  for (double z : {0.05, 0.5, 0.95}) EXPECT_NEAR(pushforward_density(qs, mu, z, 128), 1.0, 1e-6);
  EXPECT_THROW(pushforward_density(qs, mu, 0.0), OutOfDomain);
  EXPECT_THROW(pushforward_density(qs, mu, 1.0), OutOfDomain);
}

TEST(Quotient, ShelfDensityMatchesLeafLength) {
  const CostModel c = costs::bilinear(domains::shelf(), {0.0, 1.0});
  const SourceMeasure mu = SourceMeasure::uniform(domains::shelf(), 200);
  QuotientOptions opt;
  opt.curve_resolution = 512;
  opt.z_grid = 256;
  const auto qs = build_quotient(c, mu, opt);
  EXPECT_NEAR(qs.z_range().lo, -1.0, 1e-12);
  EXPECT_NEAR(qs.z_range().hi, 1.0, 1e-12);
  const double k = 1.0 / shelf_area_simpson();
  for (double z : {-0.9, -0.5, -0.05}) EXPECT_NEAR(pushforward_density(qs, mu, z) / (2 * k), 1.0, 5e-3) << z;
  for (double z : {0.05, 0.5, 0.9}) {
    const double expected = k * (1.0 - domains::shelf_profile_inverse(z));
    EXPECT_NEAR(pushforward_density(qs, mu, z) / expected, 1.0, 1e-2) << z;
  }
  // The density jumps by about k across z = 0.
  EXPECT_GT(pushforward_density(qs, mu, -0.01) - pushforward_density(qs, mu, 0.01), 0.8 * k);
}

TEST(Quotient, NotCLinearCostIsRejected) {
  const SourceMeasure mu = SourceMeasure::uniform(domains::quarter_disk(), 40);
  EXPECT_THROW(build_quotient(costs::quarter_disk(), mu), NotCLinear);
}

TEST(Quotient, DegenerateGradientIsRejected) {
  // dc/dy = x2^2 has a vanishing x-gradient along x2 = 0.
  CostPartials d;
  d.dcdy = [](Point2 x, double) { return x.x2 * x.x2; };
  d.grad_x_dcdy = [](Point2 x, double) { return Vec2{0.0, 2 * x.x2}; };
  const Domain dom = domains::rectangle({-1.0, 1.0}, {-1.0, 1.0});
  const CostModel c("x2^2 y", [](Point2 x, double y) { return x.x2 * x.x2 * y; }, dom, {0.0, 1.0}, d);
  const SourceMeasure mu = SourceMeasure::uniform(dom, 40);
  EXPECT_THROW(build_quotient(c, mu), DegeneratePoint);
}

TEST(Quotient, RepresentativeDoesNotMatter) {
  const CostModel c = exp_foliated();
  const SourceMeasure mu = SourceMeasure::uniform(domains::unit_square(), 60);
  QuotientOptions opt;
  opt.curve_resolution = 128;
  opt.z_grid = 64;
  const auto qs = build_quotient(c, mu, opt);
  for (double z : {qs.z_range().lo + 0.3, qs.z_range().mid(), qs.z_range().hi - 0.3}) {
    const auto reps = qs.representatives(z);
    ASSERT_GE(reps.size(), 2u) << z;
    for (double y : {0.1, 0.6, 0.9}) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& x : reps) {
        const double b = c(x, y) - c(x, qs.y0());
        lo = std::min(lo, b);
        hi = std::max(hi, b);
      }
      EXPECT_LE(hi - lo, 1e-9) << z << ' ' << y;
    }
  }
}

TEST(LpBound, HoldsOnSquareAndShelf) {
  const SourceMeasure sq = SourceMeasure::uniform(domains::unit_square(), 100);
  for (double p : {1.0, 2.0, 4.0}) {
    const auto b = lp_bound_check(bilinear_qs(), sq, p);
    EXPECT_TRUE(b.pass) << p;
    EXPECT_NEAR(b.C, 1.0, 1e-9);
    EXPECT_NEAR(b.K, 1.0, 1e-12);
    EXPECT_NEAR(b.lhs, 1.0, 1e-6);
    EXPECT_NEAR(b.rhs, 1.0, 1e-9);
  }
  const CostModel c = costs::bilinear(domains::shelf(), {0.0, 1.0});
  const SourceMeasure mu = SourceMeasure::uniform(domains::shelf(), 100);
  QuotientOptions opt;
  opt.curve_resolution = 256;
  opt.z_grid = 128;
  const auto qs = build_quotient(c, mu, opt);
  for (double p : {1.0, 2.0, 4.0}) EXPECT_TRUE(lp_bound_check(qs, mu, p).pass) << p;
  EXPECT_THROW(lp_bound_check(qs, mu, 0.5), ConfigError);
}

TEST(Solve1D, MonotoneAndAntitoneExamples) {
  const Interval Z{0.0, 1.0};
  auto cdf = [](double z) { return z; };
  const auto nu = TargetMeasure::uniform({0.0, 1.0});

  const auto anti = solve_1d([](double z, double y) { return z * y; }, Z, cdf, nu);
  EXPECT_TRUE(anti.antitone());
  const auto mono = solve_1d([](double z, double y) { return -z * y; }, Z, cdf, nu);
  EXPECT_FALSE(mono.antitone());
  const auto half_nu = TargetMeasure::uniform({0.0, 0.5});
  const auto half = solve_1d([](double z, double y) { return (z - y) * (z - y); }, Z, cdf, half_nu);
  for (double z : {0.0, 0.2, 0.5, 0.9}) {
    EXPECT_NEAR(anti(z), 1.0 - z, 1e-9);
    EXPECT_NEAR(mono(z), z, 1e-9);
    EXPECT_NEAR(half(z), z / 2, 1e-9);
  }
}

TEST(Solve1D, MixedSignIsRejected) {
  const auto nu = TargetMeasure::uniform({-1.0, 1.0});
  EXPECT_THROW(solve_1d([](double z, double y) { return z * y * y; }, {0.0, 1.0}, [](double z) { return z; }, nu),
               MixedSign);
  EXPECT_THROW(mixed_partial_positive({1.0, 0.0, 2.0}), MixedSign);
  EXPECT_TRUE(mixed_partial_positive({1.0, 3.0}));
  EXPECT_FALSE(mixed_partial_positive({-1.0, -3.0}));
}

TEST(Solve1D, BilinearQuotientIsAntitone) {
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  const auto T = solve_1d(bilinear_qs(), nu);
  EXPECT_TRUE(T.antitone());
  for (double z : {0.1, 0.4, 0.8}) EXPECT_NEAR(T(z), 1.0 - z, 1e-5);
}

TEST(Holder, Arithmetic) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(holder_exponent(1, inf), 1.0);
  EXPECT_EQ(holder_exponent(2, inf), 1.0 / 3.0);
  // beta = 1 - 3/6 = 1/2: (3/2) / (8 + 1/2) = 3/17.
  EXPECT_NEAR(holder_exponent(2, 3.0), 3.0 / 17.0, 1e-15);
  EXPECT_NO_THROW(holder_exponent(2, 1.6));
  EXPECT_THROW(holder_exponent(2, 1.5), OutOfDomain);
  EXPECT_THROW(holder_exponent(1, 1.0), OutOfDomain);
  EXPECT_THROW(holder_exponent(0, inf), OutOfDomain);
}

TEST(Quotient, DensityCsv) {
  std::ostringstream os;
  write_density_csv(os, bilinear_qs());
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("z,h\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')), bilinear_qs().z_nodes().size() + 1);
}

TEST(Quotient, ReducedCostInheritsTwist) {
  // db/dy(z, y) = z for the bilinear quotient: strictly increasing in z.
  const auto& qs = bilinear_qs();
  const double h = 1e-4;
  for (double y : {0.2, 0.5, 0.8}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 1; k < 20; ++k) {
      const double z = k / 20.0;
      const double d = (qs.reduced_cost(z, y + h) - qs.reduced_cost(z, y - h)) / (2 * h);
      EXPECT_GT(d, prev) << z << ' ' << y;
      prev = d;
    }
  }
}

TEST(Quotient, DensityIntegratesToOne) {
  const auto& qs = bilinear_qs();
  EXPECT_NEAR(qs.h_cdf(qs.z_range().hi), 1.0, 1e-9);
  for (double z : qs.z_nodes()) EXPECT_GE(qs.h(z), 0.0);
}
