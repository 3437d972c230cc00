#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "splitot/oracle.hpp"

using namespace splitot;

namespace {

DiscreteProblem matrix(std::size_t m, std::size_t n, const std::vector<double>& c) {
  std::vector<Point2> xs(m);
  for (std::size_t i = 0; i < m; ++i) xs[i] = {static_cast<double>(i), 0.0};
  std::vector<double> ys(n);
  std::iota(ys.begin(), ys.end(), 0.0);
  return DiscreteProblem(xs, std::vector<double>(m, 1.0), ys, std::vector<double>(n, 1.0), c);
}

DiscreteProblem random_problem(std::size_t m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Point2> xs(m);
  std::vector<double> wx(m), ys(n), wy(n);
  for (auto& x : xs) x = {u(rng), u(rng)};
  for (auto& w : wx) w = 0.1 + u(rng);
  for (auto& y : ys) y = u(rng);
  for (auto& w : wy) w = 0.1 + u(rng);
  return DiscreteProblem::from_cost(xs, wx, ys, wy, [](Point2 x, double y) { return std::exp(x.x1 * y) + x.x2 * y * y; });
}

// Monotone coupling of two weighted point sets on the line: the optimum for
// any cost with negative mixed partial, here (x - y)^2.
double quantile_coupling_cost(std::vector<std::pair<double, double>> a, std::vector<std::pair<double, double>> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double sa = 0, sb = 0;
  for (auto& p : a) sa += p.second;
  for (auto& p : b) sb += p.second;
  for (auto& p : a) p.second /= sa;
  for (auto& p : b) p.second /= sb;
  double total = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i].second, b[j].second);
    total += t * (a[i].first - b[j].first) * (a[i].first - b[j].first);
    a[i].second -= t;
    b[j].second -= t;
    if (a[i].second <= 1e-15) ++i;
    if (j < b.size() && b[j].second <= 1e-15) ++j;
  }
  return total;
}

}  // namespace

TEST(Discretize, UniformSquareAtoms) {
  const auto mu = SourceMeasure::uniform(domains::unit_square(), 40);
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  const auto dp = discretize(costs::bilinear(), mu, nu, 4, 5);
  ASSERT_EQ(dp.sources(), 16u);
  ASSERT_EQ(dp.targets(), 5u);
  for (double w : dp.source_weights()) EXPECT_NEAR(w, 1.0 / 16, 1e-12);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(dp.target_atoms()[j], 0.1 + 0.2 * j, 1e-12);
    EXPECT_NEAR(dp.target_weights()[j], 0.2, 1e-12);
  }
  EXPECT_DOUBLE_EQ(dp.cost(5, 2), dp.source_atoms()[5].x2 * 0.5);
  EXPECT_THROW(discretize(costs::bilinear(), mu, nu, 1, 5), ConfigError);
}

TEST(Discretize, QuarterDiskDropsOutsideAtoms) {
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 100);
  const auto nu = TargetMeasure::uniform({0.0, kPi / 2});
  const auto dp = discretize(costs::quarter_disk(), mu, nu, 10, 8);
  EXPECT_LT(dp.sources(), 100u);
  EXPECT_GT(dp.sources(), 70u);
  for (const auto& x : dp.source_atoms()) EXPECT_TRUE(domains::quarter_disk().contains(x));
  EXPECT_NEAR(std::accumulate(dp.source_weights().begin(), dp.source_weights().end(), 0.0), 1.0, 1e-12);
}

TEST(DiscreteProblem, Validation) {
  EXPECT_THROW(matrix(2, 2, {0, 1, 1}), ConfigError);
  EXPECT_THROW(DiscreteProblem({{0, 0}}, {-1.0}, {0.0}, {1.0}, {0.0}), ConfigError);
  EXPECT_THROW(DiscreteProblem({}, {}, {0.0}, {1.0}, {}), ConfigError);
  auto dp = matrix(3, 1, {0, 0, 0});
  dp.perturb_sources(1e-3);
  const auto& w = dp.source_weights();
  EXPECT_LT(w[0], w[1]);
  EXPECT_LT(w[1], w[2]);
  EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
}

TEST(Simplex, OneByOne) {
  const auto plan = solve_kantorovich(matrix(1, 1, {3.5}));
  ASSERT_EQ(plan.cells.size(), 1u);
  EXPECT_DOUBLE_EQ(plan.cells[0].flow, 1.0);
  EXPECT_DOUBLE_EQ(plan.objective, 3.5);
}

TEST(Simplex, TwoByTwo) {
  const auto a = solve_kantorovich(matrix(2, 2, {0, 1, 1, 0}));
  EXPECT_NEAR(a.objective, 0.0, 1e-15);
  const auto b = solve_kantorovich(matrix(2, 2, {1, 0, 0, 1}));
  EXPECT_NEAR(b.objective, 0.0, 1e-15);
  EXPECT_GE(b.iterations, 1u);
}

TEST(Simplex, NorthwestCornerSpansTheTableau) {
  const auto dp = matrix(3, 3, std::vector<double>(9, 0.0));
  const auto cells = detail::northwest_corner(dp);
  EXPECT_EQ(cells.size(), 5u);
  double total = 0.0;
  for (const auto& c : cells) total += c.flow;
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(Simplex, AssignmentMatchesBruteForce) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t n = 2; n <= 6; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      std::vector<double> c(n * n);
      for (auto& v : c) v = std::round(10 * u(rng));  // integer costs make ties likely
      const auto plan = solve_kantorovich(matrix(n, n, c));
      std::vector<std::size_t> p(n);
      std::iota(p.begin(), p.end(), 0);
      double best = std::numeric_limits<double>::infinity();
      do {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i) s += c[i * n + p[i]];
        best = std::min(best, s / n);
      } while (std::next_permutation(p.begin(), p.end()));
      EXPECT_NEAR(plan.objective, best, 1e-12) << "n=" << n << " rep=" << rep;
    }
  }
}

TEST(Simplex, SeparableCostMatchesQuantileCoupling) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t m = 7 + rep, n = 9;
    std::vector<Point2> xs(m);
    std::vector<double> wx(m), ys(n), wy(n);
    std::vector<std::pair<double, double>> a, b;
    for (std::size_t i = 0; i < m; ++i) {
      xs[i] = {u(rng), u(rng)};
      wx[i] = 0.1 + u(rng);
      a.emplace_back(xs[i].x1, wx[i]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      ys[j] = u(rng);
      wy[j] = 0.1 + u(rng);
      b.emplace_back(ys[j], wy[j]);
    }
    const auto dp = DiscreteProblem::from_cost(xs, wx, ys, wy, [](Point2 x, double y) { return (x.x1 - y) * (x.x1 - y); });
    EXPECT_NEAR(solve_kantorovich(dp).objective, quantile_coupling_cost(a, b), 1e-12);
  }
}

TEST(Simplex, CertificatesOnRandomProblems) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto dp = random_problem(12, 15, seed);
    const auto plan = solve_kantorovich(dp);
    const auto cert = certify(plan, dp);
    EXPECT_LE(cert.dual_feasibility, 1e-12);
    EXPECT_LE(cert.complementary_slackness, 1e-12);
    EXPECT_LE(cert.marginal_error, 1e-12);
    EXPECT_EQ(cert.basic_cells, cert.basis_limit);
    EXPECT_NEAR(plan.v[0], 0.0, 0.0);
    // Strong duality.
    double dual = 0.0;
    for (std::size_t i = 0; i < dp.sources(); ++i) dual += plan.u[i] * dp.source_weights()[i];
    for (std::size_t j = 0; j < dp.targets(); ++j) dual += plan.v[j] * dp.target_weights()[j];
    EXPECT_NEAR(dual, plan.objective, 1e-12);
  }
}

TEST(Simplex, StallsOnTinyBudget) {
  // c(i, j) = i j: the optimum is anti-diagonal, far from the northwest start.
  const std::size_t n = 6;
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = static_cast<double>(i * j);
  SimplexOptions opt;
  opt.pivot_budget = 2;
  EXPECT_THROW(solve_kantorovich(matrix(n, n, c), opt), DegenerateStall);
  const auto plan = solve_kantorovich(matrix(n, n, c));
  EXPECT_NEAR(plan.objective, 20.0 / 6.0, 1e-12);  // sum of i (5 - i), over 6
}

TEST(CMonotone, OptimalPlanHasNoViolation) {
  const auto dp = random_problem(10, 10, 4);
  const auto r = c_monotonicity_check(solve_kantorovich(dp), dp, 10000);
  EXPECT_LE(r.worst_violation, 1e-12);
  EXPECT_GT(r.pairs, 0u);
}

TEST(CMonotone, CrossingPlanIsDetected) {
  const auto dp = matrix(2, 2, {0, 1, 1, 0});
  const auto opt = solve_kantorovich(dp);
  EXPECT_LE(c_monotonicity_check(opt, dp, 100).worst_violation, 0.0);
  // The optimal NW basis is (0,0), (1,0), (1,1); entering (0,1) moves all mass off the diagonal.
  const auto bad = force_pivot(opt, dp, 0, 1);
  EXPECT_NEAR(bad.objective, 1.0, 1e-15);
  const auto r = c_monotonicity_check(bad, dp, 100);
  EXPECT_NEAR(r.worst_violation, 2.0, 1e-15);
  EXPECT_GT(certify(bad, dp).dual_feasibility, 0.0);
  EXPECT_THROW(force_pivot(opt, dp, 0, 0), ConfigError);
  EXPECT_THROW(force_pivot(opt, dp, 5, 0), OutOfDomain);
}

TEST(Barycentric, DiagonalAndSplitRows) {
  const auto dp = matrix(2, 2, {0, 1, 1, 0});
  const auto bm = barycentric_map(solve_kantorovich(dp), dp);
  EXPECT_DOUBLE_EQ(bm.y_hat[0], 0.0);
  EXPECT_DOUBLE_EQ(bm.y_hat[1], 1.0);
  EXPECT_DOUBLE_EQ(bm.spread[0], 0.0);
  // One source sending mass to two targets.
  const auto one = DiscreteProblem({{0, 0}}, {1.0}, {0.0, 2.0}, {1.0, 3.0}, {0.0, 0.0});
  const auto b2 = barycentric_map(solve_kantorovich(one), one);
  EXPECT_NEAR(b2.y_hat[0], 1.5, 1e-15);
  EXPECT_DOUBLE_EQ(b2.spread[0], 2.0);
}

TEST(Indifference, PotentialsConstantAlongBilinearLeaf) {
  const auto mu = SourceMeasure::uniform(domains::unit_square(), 40);
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  const auto dp = discretize(costs::bilinear(), mu, nu, 10, 20);
  const auto plan = solve_kantorovich(dp);
  const auto curve = trace_level_curve(costs::bilinear(), {0.5, 0.55}, 0.5, 64);
  const auto r = potential_indifference_check(plan, dp, costs::bilinear(), curve);
  EXPECT_FALSE(r.skipped);
  EXPECT_EQ(r.atoms, 10u);
  EXPECT_LE(r.deviation, 1e-12);
}

TEST(Indifference, SkippedForQuarterDisk) {
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 40);
  const auto nu = TargetMeasure::uniform({0.0, kPi / 2});
  const auto dp = discretize(costs::quarter_disk(), mu, nu, 8, 8);
  const auto plan = solve_kantorovich(dp);
  const auto curve = trace_level_curve(costs::quarter_disk(), {0.3, 0.3}, kPi / 4, 64);
  const auto r = potential_indifference_check(plan, dp, costs::quarter_disk(), curve);
  EXPECT_TRUE(r.skipped);
  EXPECT_EQ(r.reason, "NotCLinear");
}

TEST(Oracle, BilinearObjectiveConvergesUnderRefinement) {
  // Continuous optimum: F(x) = 1 - x2, cost int x2 (1 - x2) = 1/6.
  const auto mu = SourceMeasure::uniform(domains::unit_square(), 80);
  const auto nu = TargetMeasure::uniform({0.0, 1.0});
  double prev = 1.0;
  for (int n : {5, 10, 20}) {
    const auto dp = discretize(costs::bilinear(), mu, nu, n, 2 * n);
    const double err = std::abs(solve_kantorovich(dp).objective - 1.0 / 6.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(Oracle, QuarterDiskBarycentricMapIsPolarAngle) {
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 100);
  const auto nu = TargetMeasure::uniform({0.0, kPi / 2});
  const auto dp = discretize(costs::quarter_disk(), mu, nu, 20, 40);
  const auto bm = barycentric_map(solve_kantorovich(dp), dp);
  double l1 = 0.0;
  for (std::size_t i = 0; i < dp.sources(); ++i) {
    const Point2 x = dp.source_atoms()[i];
    l1 += dp.source_weights()[i] * std::abs(bm.y_hat[i] - std::atan2(x.x2, x.x1));
  }
  EXPECT_LE(l1, 0.05);

  // The continuum plan is a graph, so row spreads are limited by the target spacing.
  const double spacing = (kPi / 2) / 40;
  const auto narrow = std::count_if(bm.spread.begin(), bm.spread.end(), [&](double s) { return s <= 2 * spacing + 1e-12; });
  EXPECT_GE(static_cast<double>(narrow), 0.95 * dp.sources());
}

TEST(Oracle, QuarterDiskObjectiveUnderRefinement) {
  // |grad c| <= 1 in x and y on the disk: the grid modulus is the cell diagonal plus the target spacing.
  const auto mu = SourceMeasure::uniform(domains::quarter_disk(), 120);
  const auto nu = TargetMeasure::uniform({0.0, kPi / 2});
  for (int n : {6, 12}) {
    const double coarse = solve_kantorovich(discretize(costs::quarter_disk(), mu, nu, n, 2 * n)).objective;
    const double fine = solve_kantorovich(discretize(costs::quarter_disk(), mu, nu, 2 * n, 4 * n)).objective;
    const double modulus = std::sqrt(2.0) / n + (kPi / 2) / (2 * n);
    EXPECT_LE(fine, coarse + 2 * modulus) << n;
  }
}

TEST(Oracle, CsvOutputs) {
  const auto dp = matrix(2, 2, {0, 1, 1, 0});
  const auto plan = solve_kantorovich(dp);
  std::ostringstream p, d;
  write_plan_csv(p, plan);
  write_duals_csv(d, plan, dp);
  const std::string ps = p.str(), ds = d.str();
  EXPECT_EQ(ps.rfind("i,j,mass\n", 0), 0u);
  EXPECT_EQ(std::count(ps.begin(), ps.end(), '\n'), 3);
  EXPECT_EQ(ds.rfind("side,index,coordinate,potential\n", 0), 0u);
  EXPECT_EQ(std::count(ds.begin(), ds.end(), '\n'), 5);
}
