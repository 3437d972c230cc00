// Mass splitting: the splitting function f_x(y), the split-level curves, the
// sup formula for the optimal map and a map field over a grid.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "splitot/cost_model.hpp"
#include "splitot/level_curve.hpp"
#include "splitot/measures.hpp"

namespace splitot {

class SplittingProblem {
 public:
  SplittingProblem(CostModel cost, SourceMeasure mu, TargetMeasure nu, int y_scan = 256,
                   double bisection_tolerance = 1e-6)
      : cost_(std::move(cost)), mu_(std::move(mu)), nu_(std::move(nu)), y_scan_(y_scan), tol_(bisection_tolerance) {
    if (y_scan_ < 2) throw ConfigError("SplittingProblem: y-scan resolution must be >= 2");
    if (!(tol_ > 0.0)) throw ConfigError("SplittingProblem: bisection tolerance must be positive");
    const Interval& a = cost_.y_range();
    const Interval& b = nu_.range();
    if (std::abs(a.lo - b.lo) > 1e-12 || std::abs(a.hi - b.hi) > 1e-12)
      throw ConfigError("SplittingProblem: cost target interval and nu support differ");
    ys_.resize(y_scan_);
    for (int k = 0; k < y_scan_; ++k) ys_[k] = a.lo + a.length() * k / (y_scan_ - 1);
  }

  const CostModel& cost() const { return cost_; }
  const SourceMeasure& mu() const { return mu_; }
  const TargetMeasure& nu() const { return nu_; }
  int y_scan() const { return y_scan_; }
  double bisection_tolerance() const { return tol_; }
  /// epsilon_mass = 2/N, the margin standing in for strict mass inequalities.
  double mass_tolerance() const { return mu_.mass_slack(); }
  const std::vector<double>& scan_ys() const { return ys_; }

 private:
  CostModel cost_;
  SourceMeasure mu_;
  TargetMeasure nu_;
  int y_scan_;
  double tol_;
  std::vector<double> ys_;
};

/// f_x(y) = mu{xb : dc/dy(x, y) < dc/dy(xb, y)} - nu([a, y)), by direct
/// summation over the quadrature cells.
inline double splitting_function(const SplittingProblem& sp, Point2 x, double y) {
  const Interval& Y = sp.cost().y_range();
  if (!Y.contains(y, 1e-12)) throw OutOfDomain("splitting_function: y outside the target interval");
  y = Y.clamp(y);
  const CostModel& c = sp.cost();
  const double d = c.raw_dcdy(x, y);
  return mass_of_region(sp.mu(), [&](Point2 xb) { return c.raw_dcdy(xb, y) > d; }) - sp.nu().cdf(y);
}

enum MapFlag : unsigned {
  kMapOk = 0,
  kNonUnique = 1u << 0,   // more than one sign change of f_x on the scan
  kClampLow = 1u << 1,    // f_x never exceeds epsilon_mass: F = a
  kClampHigh = 1u << 2,   // f_x never drops to zero after its last positive value: F = b
};

struct MapValue {
  double y = 0.0;
  double residual = 0.0;  // |f_x(F(x))|
  unsigned flags = kMapOk;
  int sign_changes = 0;
  double f_at_a = 0.0, f_at_b = 0.0;
};

namespace detail {

/// Cells sorted by their dc/dy value at one y, with suffix mass sums so that
/// mu{dc/dy > t} is a binary search.
struct SortedCells {
  std::vector<double> d;
  std::vector<std::uint32_t> index;
  std::vector<double> suffix;  // suffix[i] = mass of sorted cells i..end

  void build(std::span<const double> values, std::span<const SourceMeasure::Cell> cells) {
    const std::size_t n = values.size();
    index.resize(n);
    std::iota(index.begin(), index.end(), 0u);
    std::sort(index.begin(), index.end(), [&](auto a, auto b) { return values[a] < values[b]; });
    d.resize(n);
    suffix.assign(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = values[index[i]];
    for (std::size_t i = n; i-- > 0;) suffix[i] = suffix[i + 1] + cells[index[i]].mass;
  }

  std::size_t first_above(double t) const { return std::upper_bound(d.begin(), d.end(), t) - d.begin(); }
  std::size_t first_at_least(double t) const { return std::lower_bound(d.begin(), d.end(), t) - d.begin(); }
  double mass_above(double t) const { return suffix[first_above(t)]; }
};

inline double direct_mass_above(const CostModel& c, std::span<const SourceMeasure::Cell> cells, double y,
                                double t) {
  double m = 0.0;
  for (const auto& cell : cells)
    if (c.raw_dcdy(cell.center, y) > t) m += cell.mass;
  return m;
}

inline int count_sign_changes(std::span<const double> f, double eps) {
  int state = 0, changes = 0;
  for (double v : f) {
    const int s = v > eps ? 1 : (v < -eps ? -1 : 0);
    if (s == 0) continue;
    if (state != 0 && s != state) ++changes;
    state = s;
  }
  return changes;
}

}  // namespace detail

/// Optimal map at many points at once: a y-scan for the last value with
/// f_x > epsilon_mass, then bisection on the bracket [y_{j-1}, y_j] where y_j
/// is the first later scan value with f_x <= 0. Large batches count masses by
/// binary search over sorted cells and refine inside a window of cells whose
/// order relative to x may change within the bracket.
inline std::vector<MapValue> optimal_map_batch(const SplittingProblem& sp, std::span<const Point2> points) {
  const CostModel& c = sp.cost();
  const auto cells = sp.mu().cells();
  const auto& ys = sp.scan_ys();
  const std::size_t P = points.size(), S = ys.size(), NC = cells.size();
  const double eps = sp.mass_tolerance();
  const bool sorted_counting = P > 8;
  std::vector<MapValue> out(P);
  if (P == 0) return out;

  std::vector<double> f(P * S);
  std::vector<double> dcell(NC);
  detail::SortedCells sc;
  for (std::size_t k = 0; k < S; ++k) {
    const double y = ys[k];
    const double nuc = sp.nu().cdf(y);
    if (sorted_counting) {
      for (std::size_t i = 0; i < NC; ++i) dcell[i] = c.raw_dcdy(cells[i].center, y);
      sc.build(dcell, cells);
      for (std::size_t p = 0; p < P; ++p) f[p * S + k] = sc.mass_above(c.raw_dcdy(points[p], y)) - nuc;
    } else {
      for (std::size_t p = 0; p < P; ++p)
        f[p * S + k] = detail::direct_mass_above(c, cells, y, c.raw_dcdy(points[p], y)) - nuc;
    }
  }

  // Bracket index per point: refine on [ys[k], ys[k+1]]; -1 when clamped.
  std::vector<int> bracket(P, -1);
  for (std::size_t p = 0; p < P; ++p) {
    const std::span<const double> fp(&f[p * S], S);
    MapValue& mv = out[p];
    mv.f_at_a = fp.front();
    mv.f_at_b = fp.back();
    mv.sign_changes = detail::count_sign_changes(fp, eps);
    if (mv.sign_changes > 1) mv.flags |= kNonUnique;
    int last = -1;
    for (std::size_t k = 0; k < S; ++k)
      if (fp[k] > eps) last = static_cast<int>(k);
    if (last < 0) {
      mv.flags |= kClampLow;
      mv.y = ys.front();
      mv.residual = std::abs(fp.front());
      continue;
    }
    int j = -1;
    for (std::size_t k = last + 1; k < S; ++k)
      if (fp[k] <= 0.0) {
        j = static_cast<int>(k);
        break;
      }
    if (j < 0) {
      mv.flags |= kClampHigh;
      mv.y = ys.back();
      mv.residual = std::abs(fp.back());
      continue;
    }
    bracket[p] = j - 1;
  }

  const double tol = sp.bisection_tolerance();
  auto bisect = [&](std::size_t p, int k, auto&& f_at) {
    double lo = ys[k], hi = ys[k + 1];
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (f_at(mid) > 0.0) lo = mid;
      else hi = mid;
    }
    out[p].y = 0.5 * (lo + hi);
    out[p].residual = std::abs(f_at(out[p].y));
  };

  if (!sorted_counting) {
    for (std::size_t p = 0; p < P; ++p) {
      if (bracket[p] < 0) continue;
      bisect(p, bracket[p], [&](double y) {
        return detail::direct_mass_above(c, cells, y, c.raw_dcdy(points[p], y)) - sp.nu().cdf(y);
      });
    }
    return out;
  }

  std::vector<std::vector<std::size_t>> groups(S);
  for (std::size_t p = 0; p < P; ++p)
    if (bracket[p] >= 0) groups[bracket[p]].push_back(p);
  std::vector<double> dnext(NC);
  for (std::size_t k = 0; k + 1 < S; ++k) {
    if (groups[k].empty()) continue;
    for (std::size_t i = 0; i < NC; ++i) {
      dcell[i] = c.raw_dcdy(cells[i].center, ys[k]);
      dnext[i] = c.raw_dcdy(cells[i].center, ys[k + 1]);
    }
    double D = 0.0;
    for (std::size_t i = 0; i < NC; ++i) D = std::max(D, std::abs(dnext[i] - dcell[i]));
    sc.build(dcell, cells);
    for (std::size_t p : groups[k]) {
      const double d0 = c.raw_dcdy(points[p], ys[k]);
      const double lambda = std::abs(c.raw_dcdy(points[p], ys[k + 1]) - d0);
      const double W = 2.0 * (D + lambda) + 1e-12;
      const std::size_t w0 = sc.first_at_least(d0 - W), w1 = sc.first_above(d0 + W);
      const double above = sc.suffix[w1];
      bisect(p, static_cast<int>(k), [&](double y) {
        const double dp = c.raw_dcdy(points[p], y);
        double m = above;
        for (std::size_t i = w0; i < w1; ++i) {
          const auto& cell = cells[sc.index[i]];
          if (c.raw_dcdy(cell.center, y) > dp) m += cell.mass;
        }
        return m - sp.nu().cdf(y);
      });
    }
  }
  return out;
}

/// F(x) = sup{y : f_x(y) > 0} with its residual and flags.
inline MapValue optimal_map_value(const SplittingProblem& sp, Point2 x) {
  return optimal_map_batch(sp, std::span<const Point2>(&x, 1)).front();
}

inline double optimal_map(const SplittingProblem& sp, Point2 x) { return optimal_map_value(sp, x).y; }

struct SplitLevel {
  double lambda = 0.0;
  double mass_error = 0.0;  // |mu{dc/dy > lambda} - nu([a, y))|
  std::optional<LevelCurve> curve;
};

/// Threshold lambda with mu{xb : dc/dy(xb, y) > lambda} = nu([a, y)) and the
/// isocontour at that level.
inline SplitLevel split_level(const SplittingProblem& sp, double y, int curve_resolution = kDefaultCurveResolution) {
  const Interval& Y = sp.cost().y_range();
  if (!Y.contains(y, 1e-12)) throw OutOfDomain("split_level: y outside the target interval");
  const auto cells = sp.mu().cells();
  std::vector<double> d(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) d[i] = sp.cost().raw_dcdy(cells[i].center, y);
  detail::SortedCells sc;
  sc.build(d, cells);
  const double target = sp.nu().cdf(y);
  // Largest k with suffix[k] >= target; lambda sits between d[k-1] and d[k].
  std::size_t k = cells.size();
  while (k > 0 && sc.suffix[k] < target) --k;
  SplitLevel out;
  if (k == cells.size()) {
    out.lambda = sc.d.back();
  } else if (k == 0) {
    out.lambda = sc.d.front();
  } else {
    out.lambda = 0.5 * (sc.d[k - 1] + sc.d[k]);
  }
  out.mass_error = std::abs(sc.mass_above(out.lambda) - target);
  try {
    out.curve = trace_level_set(sp.cost(), out.lambda, y, curve_resolution);
  } catch (const EmptyCurve&) {
  }
  return out;
}

struct MapField {
  int grid_n = 0;
  std::vector<Point2> points;
  std::vector<MapValue> values;
  /// points index of grid node (i, j), or -1 when the node is excluded.
  std::vector<int> node_index;
  /// Largest |F(x) - F(x')| over horizontally or vertically adjacent nodes.
  double modulus = 0.0;

  int at(int i, int j) const { return node_index[static_cast<std::size_t>(j) * grid_n + i]; }
  std::size_t flagged() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const MapValue& v) { return v.flags != kMapOk; }));
  }
};

/// Optimal map on the cell centres of a grid_n x grid_n grid over the domain's
/// bounding rectangle, restricted to points inside the domain that satisfy
/// `include` (if given).
inline MapField map_field(const SplittingProblem& sp, int grid_n, const std::function<bool(Point2)>& include = {}) {
  if (grid_n < 1) throw ConfigError("map_field: grid_n must be >= 1");
  const Domain& dom = sp.cost().domain();
  const Rect& r = dom.bounds;
  MapField mf;
  mf.grid_n = grid_n;
  mf.node_index.assign(static_cast<std::size_t>(grid_n) * grid_n, -1);
  for (int j = 0; j < grid_n; ++j) {
    for (int i = 0; i < grid_n; ++i) {
      const Point2 x{r.x1.lo + r.x1.length() * (i + 0.5) / grid_n, r.x2.lo + r.x2.length() * (j + 0.5) / grid_n};
      if (!dom.contains(x) || (include && !include(x))) continue;
      mf.node_index[static_cast<std::size_t>(j) * grid_n + i] = static_cast<int>(mf.points.size());
      mf.points.push_back(x);
    }
  }
  mf.values = optimal_map_batch(sp, mf.points);
  for (int j = 0; j < grid_n; ++j) {
    for (int i = 0; i < grid_n; ++i) {
      const int a = mf.at(i, j);
      if (a < 0) continue;
      if (i + 1 < grid_n && mf.at(i + 1, j) >= 0)
        mf.modulus = std::max(mf.modulus, std::abs(mf.values[a].y - mf.values[mf.at(i + 1, j)].y));
      if (j + 1 < grid_n && mf.at(i, j + 1) >= 0)
        mf.modulus = std::max(mf.modulus, std::abs(mf.values[a].y - mf.values[mf.at(i, j + 1)].y));
    }
  }
  return mf;
}

/// Kolmogorov-Smirnov distance between nu and the empirical distribution of
/// the values ys weighted by ws.
inline double ks_distance(std::span<const double> ys, std::span<const double> ws, const TargetMeasure& nu) {
  if (ys.size() != ws.size()) throw ConfigError("ks_distance: size mismatch");
  std::vector<std::size_t> order(ys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ys[a] < ys[b]; });
  double total = 0.0;
  for (double w : ws) total += w;
  if (!(total > 0.0)) throw ConfigError("ks_distance: zero total weight");
  const Interval& Y = nu.range();
  double acc = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < order.size();) {
    const double y = ys[order[k]];
    const double ref = nu.cdf(Y.clamp(y));
    worst = std::max(worst, std::abs(acc - ref));
    while (k < order.size() && ys[order[k]] == y) acc += ws[order[k++]] / total;
    worst = std::max(worst, std::abs(acc - ref));
  }
  return worst;
}

/// KS distance between F#mu, estimated from the field weighted by the source
/// density, and nu.
inline double verify_pushforward(const SplittingProblem& sp, const MapField& field) {
  std::vector<double> ys(field.values.size()), ws(field.values.size());
  for (std::size_t k = 0; k < ys.size(); ++k) {
    ys[k] = field.values[k].y;
    ws[k] = sp.mu().density(field.points[k]);
  }
  return ks_distance(ys, ws, sp.nu());
}

/// Fraction of sampled unflagged pairs with F(x) < F(x') for which
/// dc/dy(x, F(x')) < dc/dy(x', F(x')) - tolerance.
inline double support_monotonicity_failure_rate(const SplittingProblem& sp, const MapField& field, int pairs,
                                                std::uint64_t seed = 11, double tolerance = 1e-6) {
  std::vector<std::size_t> ok;
  for (std::size_t k = 0; k < field.values.size(); ++k)
    if (field.values[k].flags == kMapOk) ok.push_back(k);
  if (ok.size() < 2 || pairs <= 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, ok.size() - 1);
  int tested = 0, failed = 0;
  for (int t = 0; t < pairs; ++t) {
    std::size_t a = ok[pick(rng)], b = ok[pick(rng)];
    if (field.values[a].y > field.values[b].y) std::swap(a, b);
    if (!(field.values[a].y < field.values[b].y)) continue;
    ++tested;
    const double yb = field.values[b].y;
    if (sp.cost().raw_dcdy(field.points[a], yb) < sp.cost().raw_dcdy(field.points[b], yb) - tolerance) ++failed;
  }
  return tested ? static_cast<double>(failed) / tested : 0.0;
}

/// CSV with columns x1,x2,F,residual,flags.
inline void write_map_csv(std::ostream& os, const MapField& field) {
  os << "x1,x2,F,residual,flags\n" << std::fixed << std::setprecision(9);
  for (std::size_t k = 0; k < field.points.size(); ++k)
    os << field.points[k].x1 << ',' << field.points[k].x2 << ',' << field.values[k].y << ','
       << field.values[k].residual << ',' << field.values[k].flags << '\n';
  os.unsetf(std::ios::floatfield);
}

}  // namespace splitot
