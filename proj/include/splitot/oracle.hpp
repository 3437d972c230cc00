// Discrete Kantorovich solver: grid discretisation of (mu, nu), the
// transportation simplex with dual potentials, and checks on the solved plan
// (c-monotone support, barycentric map, potential indifference on leaves).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "splitot/geometry.hpp"
#include "splitot/level_curve.hpp"
#include "splitot/measures.hpp"

namespace splitot {

class DiscreteProblem {
 public:
  DiscreteProblem() = default;

  /// Weights are rescaled so each side sums to one; the cost matrix is
  /// row-major with cost(i, j) = c(xs[i], ys[j]).
  DiscreteProblem(std::vector<Point2> xs, std::vector<double> wx, std::vector<double> ys, std::vector<double> wy,
                  std::vector<double> costs)
      : xs_(std::move(xs)), wx_(std::move(wx)), ys_(std::move(ys)), wy_(std::move(wy)), c_(std::move(costs)) {
    if (xs_.size() != wx_.size() || ys_.size() != wy_.size())
      throw ConfigError("DiscreteProblem: atom and weight counts differ");
    if (xs_.empty() || ys_.empty()) throw ConfigError("DiscreteProblem: empty marginal");
    if (c_.size() != xs_.size() * ys_.size()) throw ConfigError("DiscreteProblem: cost matrix has wrong size");
    rebalance(wx_);
    rebalance(wy_);
  }

  /// Builds the cost matrix from a callable c(x, y).
  template <class Cost>
  static DiscreteProblem from_cost(std::vector<Point2> xs, std::vector<double> wx, std::vector<double> ys,
                                   std::vector<double> wy, Cost&& c) {
    std::vector<double> C(xs.size() * ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      for (std::size_t j = 0; j < ys.size(); ++j) C[i * ys.size() + j] = c(xs[i], ys[j]);
    return DiscreteProblem(std::move(xs), std::move(wx), std::move(ys), std::move(wy), std::move(C));
  }

  std::size_t sources() const { return xs_.size(); }
  std::size_t targets() const { return ys_.size(); }
  const std::vector<Point2>& source_atoms() const { return xs_; }
  const std::vector<double>& source_weights() const { return wx_; }
  const std::vector<double>& target_atoms() const { return ys_; }
  const std::vector<double>& target_weights() const { return wy_; }
  double cost(std::size_t i, std::size_t j) const { return c_[i * ys_.size() + j]; }

  /// Adds (i + 1) * eps to source weight i and rebalances.
  void perturb_sources(double eps) {
    for (std::size_t i = 0; i < wx_.size(); ++i) wx_[i] += static_cast<double>(i + 1) * eps;
    rebalance(wx_);
  }

 private:
  static void rebalance(std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) {
      if (!(v >= 0.0)) throw ConfigError("DiscreteProblem: negative weight");
      s += v;
    }
    if (!(s > 0.0)) throw ConfigError("DiscreteProblem: zero total weight");
    for (double& v : w) v /= s;
  }

  std::vector<Point2> xs_;
  std::vector<double> wx_;
  std::vector<double> ys_;
  std::vector<double> wy_;
  std::vector<double> c_;
};

/// Source atoms at the cell centres of an nx x nx grid over the bounding
/// rectangle, weighted by the cell mass; target atoms at the midpoints of ny
/// equal subintervals, weighted by their nu mass. Zero-weight atoms are dropped.
inline DiscreteProblem discretize(const CostModel& cost, const SourceMeasure& mu, const TargetMeasure& nu, int nx,
                                  int ny) {
  if (nx < 2 || ny < 2) throw ConfigError("discretize: nx and ny must be >= 2");
  const Rect& r = cost.domain().bounds;
  const double h1 = r.x1.length() / nx, h2 = r.x2.length() / nx;
  std::vector<Point2> xs;
  std::vector<double> wx;
  for (int j = 0; j < nx; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Point2 x{r.x1.lo + (i + 0.5) * h1, r.x2.lo + (j + 0.5) * h2};
      const double w = mu.density(x) * h1 * h2;
      if (w > 0.0) {
        xs.push_back(x);
        wx.push_back(w);
      }
    }
  }
  const Interval& Y = nu.range();
  const double dy = Y.length() / ny;
  std::vector<double> ys, wy;
  for (int k = 0; k < ny; ++k) {
    const double w = nu.cdf(Y.lo + (k + 1) * dy) - nu.cdf(Y.lo + k * dy);
    if (w > 0.0) {
      ys.push_back(Y.lo + (k + 0.5) * dy);
      wy.push_back(w);
    }
  }
  if (xs.empty()) throw ConfigError("discretize: no source atom carries mass");
  return DiscreteProblem::from_cost(std::move(xs), std::move(wx), std::move(ys), std::move(wy),
                                    [&](Point2 x, double y) { return cost(x, y); });
}

struct BasicCell {
  std::size_t i = 0, j = 0;
  double flow = 0.0;
};

struct TransportPlan {
  /// Basic cells of the final basis (possibly with zero flow).
  std::vector<BasicCell> cells;
  double objective = 0.0;
  std::vector<double> u;  // source potentials
  std::vector<double> v;  // target potentials, v[0] = 0
  std::size_t iterations = 0;
  std::size_t degenerate_pivots = 0;
  bool perturbed = false;

  std::vector<BasicCell> support(double threshold = 1e-14) const {
    std::vector<BasicCell> s;
    for (const auto& c : cells)
      if (c.flow > threshold) s.push_back(c);
    return s;
  }
};

struct SimplexOptions {
  std::size_t pivot_budget = 1'000'000;
  double optimality_tolerance = 1e-11;
  double perturbation = 1e-12;
};

namespace detail {

/// Spanning-tree bookkeeping for a transportation basis. Nodes 0..m-1 are
/// sources, m..m+n-1 are targets; every basic cell is an edge.
class TransportBasis {
 public:
  TransportBasis(const DiscreteProblem& dp, std::vector<BasicCell> cells)
      : dp_(dp), m_(dp.sources()), n_(dp.targets()), cells_(std::move(cells)) {}

  std::vector<BasicCell>& cells() { return cells_; }

  void potentials(std::vector<double>& u, std::vector<double>& v) const {
    const auto adj = adjacency();
    u.assign(m_, std::numeric_limits<double>::quiet_NaN());
    v.assign(n_, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> stack{m_};
    v[0] = 0.0;
    std::vector<char> seen(m_ + n_, 0);
    seen[m_] = 1;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      for (std::size_t e : adj[a]) {
        const BasicCell& c = cells_[e];
        const std::size_t b = a < m_ ? m_ + c.j : c.i;
        if (seen[b]) continue;
        seen[b] = 1;
        if (b < m_) u[b] = dp_.cost(c.i, c.j) - v[c.j];
        else v[b - m_] = dp_.cost(c.i, c.j) - u[c.i];
        stack.push_back(b);
      }
    }
    for (std::size_t k = 0; k < m_ + n_; ++k)
      if (!seen[k]) throw DegenerateStall("transportation basis is not a spanning tree");
  }

  /// Cell indices on the tree path from source node i to target node j, in
  /// order starting at i.
  std::vector<std::size_t> path(std::size_t i, std::size_t j) const {
    const auto adj = adjacency();
    const std::size_t N = m_ + n_, none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> parent_edge(N, none);
    std::vector<char> seen(N, 0);
    std::vector<std::size_t> queue{m_ + j};
    seen[m_ + j] = 1;
    for (std::size_t q = 0; q < queue.size() && !seen[i]; ++q) {
      const std::size_t a = queue[q];
      for (std::size_t e : adj[a]) {
        const BasicCell& c = cells_[e];
        const std::size_t b = a < m_ ? m_ + c.j : c.i;
        if (seen[b]) continue;
        seen[b] = 1;
        parent_edge[b] = e;
        queue.push_back(b);
      }
    }
    if (!seen[i]) throw DegenerateStall("transportation basis is disconnected");
    std::vector<std::size_t> out;
    for (std::size_t a = i; a != m_ + j;) {
      const std::size_t e = parent_edge[a];
      out.push_back(e);
      a = a < m_ ? m_ + cells_[e].j : cells_[e].i;
    }
    return out;
  }

  /// Brings (i, j) into the basis; returns the pivot step length.
  double pivot(std::size_t i, std::size_t j) {
    const auto p = path(i, j);
    // Entering cell gains theta; path cells alternate -, +, -, ...
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = 0;
    for (std::size_t k = 0; k < p.size(); k += 2) {
      const BasicCell& c = cells_[p[k]];
      const std::size_t key = c.i * n_ + c.j;
      const std::size_t best_key = cells_[leave].i * n_ + cells_[leave].j;
      if (c.flow < theta || (c.flow == theta && key < best_key)) {
        theta = c.flow;
        leave = p[k];
      }
    }
    for (std::size_t k = 0; k < p.size(); ++k) cells_[p[k]].flow += (k % 2 == 0 ? -theta : theta);
    cells_[leave] = BasicCell{i, j, theta};
    for (std::size_t k = 0; k < p.size(); k += 2)
      if (cells_[p[k]].flow < 0.0) cells_[p[k]].flow = 0.0;
    return theta;
  }

 private:
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(m_ + n_);
    for (std::size_t e = 0; e < cells_.size(); ++e) {
      adj[cells_[e].i].push_back(e);
      adj[m_ + cells_[e].j].push_back(e);
    }
    return adj;
  }

  const DiscreteProblem& dp_;
  std::size_t m_, n_;
  std::vector<BasicCell> cells_;
};

inline std::vector<BasicCell> northwest_corner(const DiscreteProblem& dp) {
  std::vector<double> a = dp.source_weights(), b = dp.target_weights();
  const std::size_t m = a.size(), n = b.size();
  std::vector<BasicCell> cells;
  cells.reserve(m + n - 1);
  std::size_t i = 0, j = 0;
  while (i < m && j < n) {
    if (i == m - 1) {
      // Last row takes whatever the remaining columns need.
      for (; j < n; ++j) cells.push_back({i, j, std::max(0.0, b[j])});
      break;
    }
    if (j == n - 1) {
      for (; i < m; ++i) cells.push_back({i, j, std::max(0.0, a[i])});
      break;
    }
    const double t = std::min(a[i], b[j]);
    cells.push_back({i, j, t});
    a[i] -= t;
    b[j] -= t;
    if (a[i] <= b[j]) ++i;  // on ties advance the row only; the zero cell keeps the tree spanning
    else ++j;
  }
  return cells;
}

inline void finish_plan(const DiscreteProblem& dp, TransportBasis& basis, TransportPlan& plan) {
  plan.cells = basis.cells();
  basis.potentials(plan.u, plan.v);
  plan.objective = 0.0;
  for (const auto& c : plan.cells) plan.objective += c.flow * dp.cost(c.i, c.j);
}

}  // namespace detail

/// Exact optimum of the discrete transportation problem by the transportation
/// simplex: northwest-corner start, MODI reduced costs with Dantzig pricing,
/// and Bland's rule while pivots stay degenerate. If half of the pivot budget
/// is spent, source weights are perturbed and the solve restarts.
inline TransportPlan solve_kantorovich(const DiscreteProblem& problem, SimplexOptions opt = {}) {
  DiscreteProblem dp = problem;
  TransportPlan plan;
  const std::size_t m = dp.sources(), n = dp.targets();
  std::size_t total = 0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    detail::TransportBasis basis(dp, detail::northwest_corner(dp));
    std::vector<double> u, v;
    std::size_t degenerate_run = 0;
    const std::size_t limit = attempt == 0 ? opt.pivot_budget / 2 : opt.pivot_budget;
    bool restarted = false;
    for (;;) {
      basis.potentials(u, v);
      const bool bland = degenerate_run > m + n;
      double best = -opt.optimality_tolerance;
      std::size_t bi = m, bj = n;
      for (std::size_t i = 0; i < m && !(bland && bi < m); ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double r = dp.cost(i, j) - u[i] - v[j];
          if (r < best) {
            best = r;
            bi = i;
            bj = j;
            if (bland) break;
          }
        }
      }
      if (bi == m) break;
      if (total >= limit) {
        if (attempt == 0) {
          dp.perturb_sources(opt.perturbation);
          plan.perturbed = true;
          restarted = true;
          break;
        }
        throw DegenerateStall("solve_kantorovich: pivot budget exhausted");
      }
      const double theta = basis.pivot(bi, bj);
      ++total;
      if (theta == 0.0) {
        ++degenerate_run;
        ++plan.degenerate_pivots;
      } else {
        degenerate_run = 0;
      }
    }
    if (restarted) continue;
    plan.iterations = total;
    detail::finish_plan(dp, basis, plan);
    return plan;
  }
  throw DegenerateStall("solve_kantorovich: pivot budget exhausted");
}

/// Pivots cell (i, j) into the basis of a plan regardless of its reduced cost
/// and recomputes potentials and objective. Used to build sub-optimal plans.
inline TransportPlan force_pivot(const TransportPlan& plan, const DiscreteProblem& dp, std::size_t i, std::size_t j) {
  if (i >= dp.sources() || j >= dp.targets()) throw OutOfDomain("force_pivot: cell index out of range");
  for (const auto& c : plan.cells)
    if (c.i == i && c.j == j) throw ConfigError("force_pivot: cell is already basic");
  detail::TransportBasis basis(dp, plan.cells);
  basis.pivot(i, j);
  TransportPlan out = plan;
  ++out.iterations;
  detail::finish_plan(dp, basis, out);
  return out;
}

struct PlanCertificate {
  double dual_feasibility = 0.0;          // max(0, max_ij u_i + v_j - C_ij)
  double complementary_slackness = 0.0;   // max over positive-flow cells of |u_i + v_j - C_ij|
  double marginal_error = 0.0;            // max deviation of row and column sums
  std::size_t basic_cells = 0;
  std::size_t basis_limit = 0;            // m + n - 1
};

inline PlanCertificate certify(const TransportPlan& plan, const DiscreteProblem& dp) {
  PlanCertificate cert;
  const std::size_t m = dp.sources(), n = dp.targets();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      cert.dual_feasibility = std::max(cert.dual_feasibility, plan.u[i] + plan.v[j] - dp.cost(i, j));
  std::vector<double> rows(m, 0.0), cols(n, 0.0);
  for (const auto& c : plan.cells) {
    rows[c.i] += c.flow;
    cols[c.j] += c.flow;
    if (c.flow > 0.0)
      cert.complementary_slackness =
          std::max(cert.complementary_slackness, std::abs(plan.u[c.i] + plan.v[c.j] - dp.cost(c.i, c.j)));
  }
  for (std::size_t i = 0; i < m; ++i)
    cert.marginal_error = std::max(cert.marginal_error, std::abs(rows[i] - dp.source_weights()[i]));
  for (std::size_t j = 0; j < n; ++j)
    cert.marginal_error = std::max(cert.marginal_error, std::abs(cols[j] - dp.target_weights()[j]));
  cert.basic_cells = plan.cells.size();
  cert.basis_limit = m + n - 1;
  return cert;
}

struct MonotonicityResult {
  double worst_violation = 0.0;
  std::size_t pairs = 0;
};

/// Largest C_ij + C_kl - C_il - C_kj over sampled pairs of support cells.
inline MonotonicityResult c_monotonicity_check(const TransportPlan& plan, const DiscreteProblem& dp, int sample_pairs,
                                               std::uint64_t seed = 5) {
  const auto s = plan.support();
  MonotonicityResult r;
  r.worst_violation = -std::numeric_limits<double>::infinity();
  if (s.size() < 2 || sample_pairs <= 0) {
    r.worst_violation = 0.0;
    return r;
  }
  auto violation = [&](const BasicCell& a, const BasicCell& b) {
    return dp.cost(a.i, a.j) + dp.cost(b.i, b.j) - dp.cost(a.i, b.j) - dp.cost(b.i, a.j);
  };
  const std::size_t all = s.size() * (s.size() - 1) / 2;
  if (all <= static_cast<std::size_t>(sample_pairs)) {
    for (std::size_t a = 0; a < s.size(); ++a)
      for (std::size_t b = a + 1; b < s.size(); ++b) r.worst_violation = std::max(r.worst_violation, violation(s[a], s[b]));
    r.pairs = all;
    return r;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, s.size() - 1);
  while (r.pairs < static_cast<std::size_t>(sample_pairs)) {
    const std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    r.worst_violation = std::max(r.worst_violation, violation(s[a], s[b]));
    ++r.pairs;
  }
  return r;
}

struct BarycentricMap {
  std::vector<double> y_hat;
  /// max_j - min_j of y_j over the support of row i.
  std::vector<double> spread;
};

inline BarycentricMap barycentric_map(const TransportPlan& plan, const DiscreteProblem& dp) {
  const std::size_t m = dp.sources();
  BarycentricMap out;
  out.y_hat.assign(m, 0.0);
  std::vector<double> mass(m, 0.0), lo(m, std::numeric_limits<double>::infinity()),
      hi(m, -std::numeric_limits<double>::infinity());
  for (const auto& c : plan.cells) {
    if (!(c.flow > 0.0)) continue;
    const double y = dp.target_atoms()[c.j];
    out.y_hat[c.i] += c.flow * y;
    mass[c.i] += c.flow;
    lo[c.i] = std::min(lo[c.i], y);
    hi[c.i] = std::max(hi[c.i], y);
  }
  out.spread.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (mass[i] > 0.0) {
      out.y_hat[i] /= mass[i];
      out.spread[i] = hi[i] - lo[i];
    } else {
      out.y_hat[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

struct IndifferenceResult {
  bool skipped = false;
  std::string reason;
  double deviation = 0.0;
  std::size_t atoms = 0;
  std::size_t target = 0;  // index of the common target atom
};

/// For the source atoms nearest to the vertices of a leaf, the spread of
/// u_i - c(x_i, yb) at the target atom yb receiving most of their mass.
/// Skipped when the cost is not c-linear at the curve's anchor.
inline IndifferenceResult potential_indifference_check(const TransportPlan& plan, const DiscreteProblem& dp,
                                                       const CostModel& cost, const LevelCurve& curve,
                                                       double linearity_tolerance = 1e-6) {
  IndifferenceResult r;
  const auto verts = curve.vertices();
  if (verts.empty()) throw EmptyCurve("potential_indifference_check: empty curve");
  const Point2 probe = curve.anchor.finite() ? curve.anchor : verts[verts.size() / 2];
  if (c_linearity_defect(cost, probe, 16) > linearity_tolerance) {
    r.skipped = true;
    r.reason = "NotCLinear";
    return r;
  }
  const auto& xs = dp.source_atoms();
  std::vector<char> chosen(xs.size(), 0);
  std::vector<std::size_t> atoms;
  for (const auto& v : verts) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double d = distance(xs[i], v);
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    if (!chosen[best]) {
      chosen[best] = 1;
      atoms.push_back(best);
    }
  }
  std::vector<double> flow(dp.targets(), 0.0);
  for (const auto& c : plan.cells)
    if (chosen[c.i]) flow[c.j] += c.flow;
  r.target = static_cast<std::size_t>(std::max_element(flow.begin(), flow.end()) - flow.begin());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i : atoms) {
    const double d = plan.u[i] - dp.cost(i, r.target);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  r.atoms = atoms.size();
  r.deviation = hi - lo;
  return r;
}

/// CSV with columns i,j,mass over the positive-flow cells.
inline void write_plan_csv(std::ostream& os, const TransportPlan& plan) {
  auto s = plan.support();
  std::sort(s.begin(), s.end(), [](const auto& a, const auto& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  os << "i,j,mass\n" << std::scientific << std::setprecision(12);
  for (const auto& c : s) os << c.i << ',' << c.j << ',' << c.flow << '\n';
  os.unsetf(std::ios::floatfield);
}

/// CSV with columns side,index,coordinate,potential (side is u or v).
inline void write_duals_csv(std::ostream& os, const TransportPlan& plan, const DiscreteProblem& dp) {
  os << "side,index,coordinate,potential\n" << std::scientific << std::setprecision(12);
  for (std::size_t i = 0; i < plan.u.size(); ++i)
    os << "u," << i << ',' << dp.source_atoms()[i].x1 << ' ' << dp.source_atoms()[i].x2 << ',' << plan.u[i] << '\n';
  for (std::size_t j = 0; j < plan.v.size(); ++j)
    os << "v," << j << ',' << dp.target_atoms()[j] << ',' << plan.v[j] << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace splitot
