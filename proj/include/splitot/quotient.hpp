// Reduction of a c-linear problem to one on the space of leaves: the quotient
// map Q = dc/dy(., y0), the interval Z = Q(X), the reduced cost
// b(z, y) = c(x, y) - c(x, y0) for x in Q^{-1}(z), the coarea pushforward
// density h of mu, and the one-dimensional transport map T with F = T o Q.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "splitot/geometry.hpp"
#include "splitot/level_curve.hpp"
#include "splitot/measures.hpp"

namespace splitot {

struct QuotientOptions {
  double y0 = std::numeric_limits<double>::quiet_NaN();  // NaN: midpoint of Y
  int curve_resolution = kDefaultCurveResolution;
  int z_grid = 512;
  double linearity_tolerance = 1e-6;
  int linearity_probe = 5;  // probe points per axis for the c-linearity gate
  int linearity_y_samples = 16;
  int auxiliary_segments = 16;  // per axis
};

/// Straight segment x = start + s * direction, s in [s_min, s_max], crossing
/// the leaves transversally.
struct TransverseSegment {
  Point2 start;
  Vec2 direction;
  double s_min = 0.0, s_max = 0.0;
  double q_lo = 0.0, q_hi = 0.0;  // range of Q along the segment
};

class QuotientStructure {
 public:
  double y0() const { return y0_; }
  const Interval& z_range() const { return z_; }
  const CostModel& cost() const { return cost_; }
  const std::vector<TransverseSegment>& segments() const { return segments_; }

  double Q(Point2 x) const { return cost_.raw_dcdy(x, y0_); }
  double JQ(Point2 x) const { return norm(cost_.raw_grad_x_dcdy(x, y0_)); }

  /// Point x on the `k`-th transverse segment covering z with Q(x) = z.
  std::optional<Point2> representative_on(std::size_t k, double z) const {
    const auto& s = segments_.at(k);
    if (z < s.q_lo || z > s.q_hi) return std::nullopt;
    auto at = [&](double t) { return s.start + s.direction * t; };
    double a = s.s_min, b = s.s_max;
    double fa = Q(at(a)) - z;
    if (fa == 0.0) return at(a);
    for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
      const double m = 0.5 * (a + b);
      const double fm = Q(at(m)) - z;
      if (fm == 0.0) return at(m);
      if ((fm > 0) == (fa > 0)) {
        a = m;
        fa = fm;
      } else {
        b = m;
      }
    }
    return at(0.5 * (a + b));
  }

  Point2 representative(double z) const {
    require_z(z, "representative");
    for (std::size_t k = 0; k < segments_.size(); ++k)
      if (auto p = representative_on(k, z)) return *p;
    throw OutOfDomain("representative: no transverse segment reaches z");
  }

  /// Representatives of z on every stored segment that reaches it.
  std::vector<Point2> representatives(double z) const {
    require_z(z, "representatives");
    std::vector<Point2> out;
    for (std::size_t k = 0; k < segments_.size(); ++k)
      if (auto p = representative_on(k, z)) out.push_back(*p);
    return out;
  }

  double reduced_cost(double z, double y) const {
    const Point2 x = representative(z);
    return cost_(x, y) - cost_(x, y0_);
  }

  /// D_y b(z, y) = dc/dy(x, y) for x in Q^{-1}(z).
  double reduced_cost_dy(double z, double y) const { return cost_.raw_dcdy(representative(z), y); }

  // Pushforward density sampled at the midpoints of a uniform Z grid.
  const std::vector<double>& z_nodes() const { return z_nodes_; }
  const std::vector<double>& h_values() const { return h_; }
  const std::vector<double>& leaf_lengths() const { return lengths_; }
  /// Coarea integral of the unnormalised density over Z; dividing raw coarea
  /// values by it yields h with unit mass.
  double h_normalizer() const { return h_norm_; }
  double dz() const { return dz_; }
  /// Smallest |grad Q| over the source grid.
  double min_jacobian() const { return min_jq_; }
  /// Longest sampled leaf Q^{-1}(z).
  double max_leaf_length() const { return *std::max_element(lengths_.begin(), lengths_.end()); }

  double h(double z) const { return interpolate(h_, z); }

  /// CDF of the pushforward measure Q#mu at z.
  double h_cdf(double z) const {
    if (z <= z_.lo) return 0.0;
    if (z >= z_.hi) return 1.0;
    const double t = (z - z_.lo) / dz_;
    const int k = std::min(static_cast<int>(t), static_cast<int>(cdf_.size()) - 2);
    return cdf_[k] + (t - k) * (cdf_[k + 1] - cdf_[k]);
  }

 private:
  friend QuotientStructure build_quotient(const CostModel&, const SourceMeasure&, QuotientOptions);

  explicit QuotientStructure(CostModel cost) : cost_(std::move(cost)) {}

  void require_z(double z, const char* what) const {
    if (!std::isfinite(z) || !z_.contains(z, 1e-12)) throw OutOfDomain(std::string(what) + ": z outside Z");
  }

  double interpolate(const std::vector<double>& v, double z) const {
    const double t = (z - z_.lo) / dz_ - 0.5;
    if (t <= 0) return v.front();
    const int n = static_cast<int>(v.size());
    if (t >= n - 1) return v.back();
    const int k = static_cast<int>(t);
    return v[k] + (t - k) * (v[k + 1] - v[k]);
  }

  CostModel cost_;
  double y0_ = 0.0;
  Interval z_;
  std::vector<TransverseSegment> segments_;
  std::vector<double> z_nodes_, h_, lengths_, cdf_;
  double h_norm_ = 1.0;
  double dz_ = 1.0;
  double min_jq_ = 0.0;
  std::optional<ContourTracer> tracer_;
};

/// Unnormalised coarea integral of f / JQ along Q^{-1}(z) by the trapezoidal
/// rule in arclength. Optionally reports the leaf length.
inline double coarea_integral(const QuotientStructure& qs, const SourceMeasure& mu, const ContourTracer& tracer,
                              double z, double* length = nullptr) {
  const LevelCurve curve = tracer.trace(z, Point2{NAN, NAN});
  double acc = 0.0;
  for (std::size_t c = 0; c < curve.polylines.size(); ++c) {
    const auto& pl = curve.polylines[c];
    double prev = mu.density_unclipped(pl[0]) / qs.JQ(pl[0]);
    for (std::size_t k = 1; k < pl.size(); ++k) {
      const double cur = mu.density_unclipped(pl[k]) / qs.JQ(pl[k]);
      acc += 0.5 * (prev + cur) * curve.segment_lengths[c][k - 1];
      prev = cur;
    }
  }
  if (length) *length = curve.length();
  return acc;
}

namespace detail {

/// Longest straight segment through `through` along `dir` that stays inside
/// the domain, found by marching then bisecting the exit points.
inline std::pair<double, double> segment_extent(const Domain& dom, Point2 through, Vec2 dir) {
  const double step = dom.bounds.diagonal() / 1024.0;
  auto extent = [&](double sign) {
    double inside = 0.0;
    double s = step;
    while (s < 2 * dom.bounds.diagonal() && dom.contains(through + dir * (sign * s))) {
      inside = s;
      s += step;
    }
    double outside = inside + step;
    for (int it = 0; it < 60; ++it) {
      const double m = 0.5 * (inside + outside);
      if (dom.contains(through + dir * (sign * m))) inside = m;
      else outside = m;
    }
    return inside;
  };
  return {-extent(-1.0), extent(1.0)};
}

}  // namespace detail

/// Builds the quotient structure. Requires (A2) and a c-linearity defect below
/// tolerance at probe points spread over the domain.
inline QuotientStructure build_quotient(const CostModel& cost, const SourceMeasure& mu,
                                        QuotientOptions opt = {}) {
  QuotientStructure qs(cost);
  const Interval& Y = cost.y_range();
  qs.y0_ = std::isnan(opt.y0) ? Y.mid() : opt.y0;
  if (!Y.contains(qs.y0_)) throw OutOfDomain("build_quotient: y0 outside the target interval");
  const Domain& dom = cost.domain();
  const Rect& r = dom.bounds;

  // c-linearity gate on an interior probe grid.
  for (int i = 0; i < opt.linearity_probe; ++i) {
    for (int j = 0; j < opt.linearity_probe; ++j) {
      const Point2 x{r.x1.lo + r.x1.length() * (i + 0.5) / opt.linearity_probe,
                     r.x2.lo + r.x2.length() * (j + 0.5) / opt.linearity_probe};
      if (!dom.contains(x)) continue;
      const double d = c_linearity_defect(cost, x, opt.linearity_y_samples);
      if (d > opt.linearity_tolerance)
        throw NotCLinear("build_quotient: tangent directions of L_x(y) rotate with y (defect " +
                         std::to_string(d) + " rad)");
    }
  }

  // Transverse segments: the primary one through the mu-centroid (or the cell
  // nearest to it), then auxiliary ones through a coarse grid of cell centres.
  Point2 centroid{};
  for (const auto& c : mu.cells()) centroid = centroid + Vec2{c.center.x1, c.center.x2} * c.mass;
  if (!dom.contains(centroid)) {
    Point2 best = mu.cells().front().center;
    for (const auto& c : mu.cells())
      if (distance(c.center, centroid) < distance(best, centroid)) best = c.center;
    centroid = best;
  }
  auto add_segment = [&](Point2 through) {
    const Vec2 g = cost.raw_grad_x_dcdy(through, qs.y0_);
    const double n = norm(g);
    if (!(n > kDegenerateGradient)) throw DegeneratePoint("build_quotient: (A2) fails on a transverse segment");
    const Vec2 dir = g / n;
    const auto [a, b] = detail::segment_extent(dom, through, dir);
    TransverseSegment s{through, dir, a, b, 0.0, 0.0};
    const double qa = qs.Q(through + dir * a), qb = qs.Q(through + dir * b);
    s.q_lo = std::min(qa, qb);
    s.q_hi = std::max(qa, qb);
    qs.segments_.push_back(s);
  };
  add_segment(centroid);
  for (int i = 0; i < opt.auxiliary_segments; ++i) {
    for (int j = 0; j < opt.auxiliary_segments; ++j) {
      const Point2 x{r.x1.lo + r.x1.length() * (i + 0.5) / opt.auxiliary_segments,
                     r.x2.lo + r.x2.length() * (j + 0.5) / opt.auxiliary_segments};
      if (dom.contains(x)) add_segment(x);
    }
  }
  // Segments through the cells where Q is extreme make the ends of Z reachable.
  {
    auto [lo_it, hi_it] = std::minmax_element(mu.cells().begin(), mu.cells().end(),
                                              [&](const auto& a, const auto& b) { return qs.Q(a.center) < qs.Q(b.center); });
    add_segment(lo_it->center);
    add_segment(hi_it->center);
  }

  qs.min_jq_ = std::numeric_limits<double>::infinity();
  for (const auto& c : mu.cells()) qs.min_jq_ = std::min(qs.min_jq_, qs.JQ(c.center));
  if (!(qs.min_jq_ > kDegenerateGradient)) throw DegeneratePoint("build_quotient: JQ vanishes on the source grid");

  qs.tracer_.emplace(cost, qs.y0_, opt.curve_resolution);
  qs.z_ = {qs.tracer_->field_min(), qs.tracer_->field_max()};
  if (!(qs.z_.hi > qs.z_.lo)) throw DegeneratePoint("build_quotient: Q is constant on the domain");

  const int nz = opt.z_grid;
  qs.dz_ = qs.z_.length() / nz;
  qs.z_nodes_.resize(nz);
  qs.h_.resize(nz);
  qs.lengths_.resize(nz);
  double total = 0.0;
  for (int k = 0; k < nz; ++k) {
    const double z = qs.z_.lo + (k + 0.5) * qs.dz_;
    qs.z_nodes_[k] = z;
    double len = 0.0;
    double raw = 0.0;
    try {
      raw = coarea_integral(qs, mu, *qs.tracer_, z, &len);
    } catch (const EmptyCurve&) {
    }
    qs.h_[k] = raw;
    qs.lengths_[k] = len;
    total += raw * qs.dz_;
  }
  if (!(total > 0.0)) throw EmptyCurve("build_quotient: pushforward density vanishes");
  qs.h_norm_ = total;
  qs.cdf_.assign(nz + 1, 0.0);
  for (int k = 0; k < nz; ++k) {
    qs.h_[k] /= total;
    qs.cdf_[k + 1] = qs.cdf_[k] + qs.h_[k] * qs.dz_;
  }
  qs.cdf_.back() = 1.0;
  return qs;
}

inline double reduced_cost(const QuotientStructure& qs, double z, double y) { return qs.reduced_cost(z, y); }

/// h(z) by the coarea formula on a freshly traced leaf, normalised with the
/// structure's unit-mass constant.
inline double pushforward_density(const QuotientStructure& qs, const SourceMeasure& mu, double z,
                                  int curve_resolution = kDefaultCurveResolution) {
  const Interval& Z = qs.z_range();
  if (!(z > Z.lo && z < Z.hi)) throw OutOfDomain("pushforward_density: z must lie in the interior of Z");
  const ContourTracer tracer(qs.cost(), qs.y0(), curve_resolution);
  return coarea_integral(qs, mu, tracer, z) / qs.h_normalizer();
}

struct LpBound {
  double lhs = 0.0;  // integral of h^p over Z
  double rhs = 0.0;  // (C/K)^(p-1) * integral of f^p over X
  double C = 0.0;
  double K = 0.0;
  bool pass = false;
};

inline LpBound lp_bound_check(const QuotientStructure& qs, const SourceMeasure& mu, double p, double slack = 0.05) {
  if (!(p >= 1.0)) throw ConfigError("lp_bound_check: p must be >= 1");
  LpBound out;
  out.K = qs.min_jacobian();
  if (!(out.K > kDegenerateGradient)) throw DegeneratePoint("lp_bound_check: K vanishes");
  out.C = qs.max_leaf_length();
  for (double h : qs.h_values()) out.lhs += std::pow(h, p) * qs.dz();
  double fp = 0.0;
  for (const auto& c : mu.cells()) fp += std::pow(c.mass / mu.cell_area(), p) * mu.cell_area();
  out.rhs = std::pow(out.C / out.K, p - 1.0) * fp;
  out.pass = out.lhs <= out.rhs * (1.0 + slack);
  return out;
}

/// One-dimensional transport map z -> y: the monotone rearrangement when
/// D_zy b < 0, the antitone one when D_zy b > 0.
class TransportMap1D {
 public:
  TransportMap1D(std::function<double(double)> source_cdf, TargetMeasure nu, bool antitone)
      : cdf_(std::move(source_cdf)), nu_(std::move(nu)), antitone_(antitone) {}

  bool antitone() const { return antitone_; }

  double operator()(double z) const {
    const double q = std::clamp(cdf_(z), 0.0, 1.0);
    return nu_.quantile(antitone_ ? 1.0 - q : q);
  }

 private:
  std::function<double(double)> cdf_;
  TargetMeasure nu_;
  bool antitone_;
};

/// Sign of a sampled mixed partial; throws MixedSign when it changes sign or
/// vanishes somewhere on the sample grid.
inline bool mixed_partial_positive(const std::vector<double>& samples, double tol = 1e-9) {
  bool pos = true, neg = true;
  for (double s : samples) {
    pos = pos && s > tol;
    neg = neg && s < -tol;
  }
  if (!pos && !neg) throw MixedSign("D_zy b does not have a constant sign; use the discrete oracle");
  return pos;
}

/// Solves the reduced problem for a cost given directly as b(z, y) on Z x Y.
inline TransportMap1D solve_1d(const std::function<double(double, double)>& b, Interval Z,
                               std::function<double(double)> source_cdf, const TargetMeasure& nu,
                               int samples = 16) {
  const Interval& Y = nu.range();
  const double hz = 1e-3 * Z.length(), hy = 1e-3 * Y.length();
  std::vector<double> bzy;
  for (int i = 0; i < samples; ++i) {
    for (int j = 0; j < samples; ++j) {
      const double z = Z.lo + Z.length() * (i + 0.5) / samples;
      const double y = Y.lo + Y.length() * (j + 0.5) / samples;
      bzy.push_back((b(z + hz, y + hy) - b(z + hz, y - hy) - b(z - hz, y + hy) + b(z - hz, y - hy)) /
                    (4 * hz * hy));
    }
  }
  return TransportMap1D(std::move(source_cdf), nu, mixed_partial_positive(bzy));
}

/// Solves the reduced problem on Z x Y with marginals Q#mu and nu.
inline TransportMap1D solve_1d(const QuotientStructure& qs, const TargetMeasure& nu, int samples = 16) {
  const Interval& Z = qs.z_range();
  const Interval& Y = nu.range();
  const double hz = 1e-3 * Z.length();
  std::vector<double> bzy;
  for (int i = 0; i < samples; ++i) {
    const double z = Z.lo + Z.length() * (i + 0.5) / samples;
    const Point2 xp = qs.representative(z + hz), xm = qs.representative(z - hz);
    for (int j = 0; j < samples; ++j) {
      const double y = Y.lo + Y.length() * (j + 0.5) / samples;
      bzy.push_back((qs.cost().raw_dcdy(xp, y) - qs.cost().raw_dcdy(xm, y)) / (2 * hz));
    }
  }
  const bool positive = mixed_partial_positive(bzy);
  return TransportMap1D([&qs](double z) { return qs.h_cdf(z); }, nu, positive);
}

/// Hoelder exponent beta(n+1) / (2n^2 + beta(n-1)) of the optimal map for a
/// density in L^p, where beta = 1 - (n+1)/(2p). p may be +infinity.
inline double holder_exponent(int n, double p) {
  if (n < 1) throw OutOfDomain("holder_exponent: n must be >= 1");
  if (!(p > (n + 1) / 2.0)) throw OutOfDomain("holder_exponent: requires p > (n+1)/2");
  const double beta = std::isinf(p) ? 1.0 : 1.0 - (n + 1) / (2.0 * p);
  return beta * (n + 1) / (2.0 * n * n + beta * (n - 1));
}

/// CSV with columns z,h.
inline void write_density_csv(std::ostream& os, const QuotientStructure& qs) {
  os << "z,h\n" << std::setprecision(12);
  for (std::size_t k = 0; k < qs.z_nodes().size(); ++k) os << qs.z_nodes()[k] << ',' << qs.h_values()[k] << '\n';
}

}  // namespace splitot
