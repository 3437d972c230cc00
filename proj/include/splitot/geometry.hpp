// Foliation diagnostics: tangent directions of the level curves, c-linearity
// and c-convexity of the target as seen from a source point, membership in
// the pivot set P and the mass comparison property.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "splitot/cost_model.hpp"
#include "splitot/level_curve.hpp"
#include "splitot/measures.hpp"

namespace splitot {

inline constexpr double kDegenerateGradient = 1e-12;

/// Unit tangent of L_x(y) at x: orthogonal to D^2_{xy} c(x, y), with its first
/// non-zero component positive.
inline Vec2 tangent_direction(const CostModel& cost, Point2 x, double y) {
  const Vec2 g = grad_x_dcdy(cost, x, y);
  const double n = norm(g);
  if (!(n > kDegenerateGradient)) throw DegeneratePoint("tangent_direction: D2_xy c vanishes");
  Vec2 t = perp(g) / n;
  if (t.x1 < 0.0 || (t.x1 == 0.0 && t.x2 < 0.0)) t = -t;
  return t;
}

/// Spread (radians) of the tangent line of L_x(y) as y runs over `ys`,
/// computed by unwrapping the line angle modulo pi.
inline double c_linearity_defect(const CostModel& cost, Point2 x, Interval ys, int y_samples) {
  if (y_samples < 2) throw ConfigError("c_linearity_defect: need at least two y samples");
  double prev = 0.0, lo = 0.0, hi = 0.0;
  for (int k = 0; k < y_samples; ++k) {
    const double y = ys.lo + ys.length() * k / (y_samples - 1);
    const Vec2 t = tangent_direction(cost, x, y);
    double a = std::atan2(t.x2, t.x1);
    if (k == 0) {
      lo = hi = prev = a;
      continue;
    }
    while (a - prev > kPi / 2) a -= kPi;
    while (a - prev < -kPi / 2) a += kPi;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    prev = a;
  }
  return hi - lo;
}

inline double c_linearity_defect(const CostModel& cost, Point2 x, int y_samples = 32) {
  return c_linearity_defect(cost, x, cost.y_range(), y_samples);
}

struct ConvexityVerdict {
  bool convex = false;
  /// Largest distance from D_x c(x, y_k) to the least-squares line, relative
  /// to the extent of the sampled image.
  double linearity_defect = 0.0;
  bool monotone = false;
};

/// For a one-dimensional target D_x c(x, Y) is convex iff it is a straight
/// segment traversed monotonically.
inline ConvexityVerdict c_convexity_check(const CostModel& cost, Point2 x, int y_samples = 64,
                                          double tolerance = 1e-6) {
  if (y_samples < 3) throw ConfigError("c_convexity_check: need at least three y samples");
  const Interval& Y = cost.y_range();
  std::vector<Point2> pts;
  pts.reserve(y_samples);
  for (int k = 0; k < y_samples; ++k) {
    const Vec2 p = grad_x_c(cost, x, Y.lo + Y.length() * k / (y_samples - 1));
    pts.push_back({p.x1, p.x2});
  }
  Point2 mean{};
  for (auto p : pts) mean = mean + Vec2{p.x1, p.x2} / y_samples;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto p : pts) {
    const Vec2 d = p - mean;
    sxx += d.x1 * d.x1;
    sxy += d.x1 * d.x2;
    syy += d.x2 * d.x2;
  }
  // Principal axis of the 2x2 scatter matrix.
  const double angle = 0.5 * std::atan2(2 * sxy, sxx - syy);
  const Vec2 axis{std::cos(angle), std::sin(angle)};

  double defect = 0.0, extent = 0.0;
  std::vector<double> s;
  s.reserve(pts.size());
  for (auto p : pts) {
    const Vec2 d = p - mean;
    defect = std::max(defect, std::abs(cross(axis, d)));
    s.push_back(dot(axis, d));
  }
  extent = *std::max_element(s.begin(), s.end()) - *std::min_element(s.begin(), s.end());
  ConvexityVerdict v;
  v.linearity_defect = extent > 0.0 ? defect / extent : 0.0;
  const double slack = tolerance * std::max(extent, 1e-300);
  bool up = true, down = true;
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (s[k] < s[k - 1] - slack) up = false;
    if (s[k] > s[k - 1] + slack) down = false;
  }
  v.monotone = up || down;
  v.convex = v.linearity_defect <= tolerance && v.monotone;
  return v;
}

struct PSetMembership {
  bool member = false;
  /// max over sampled y0 < y1 and x in L_xt(y0) of dc/dy(xt, y1) - dc/dy(x, y1).
  double worst_violation = 0.0;
  std::size_t pairs = 0;
};

/// Samples y0 < y1 from a y_pairs-point grid of the target closure and checks
/// dc/dy(xt, y1) <= dc/dy(x, y1) on the traced vertices x of L_xt(y0).
inline PSetMembership p_set_membership(const CostModel& cost, Point2 x_tilde, int y_pairs = 15,
                                       int curve_resolution = 256, double tolerance = 1e-6) {
  detail::require_in_closure(cost, x_tilde, cost.y_range().mid(), "p_set_membership");
  if (y_pairs < 2) throw ConfigError("p_set_membership: need at least two y values");
  const Interval& Y = cost.y_range();
  std::vector<double> ys(y_pairs);
  for (int k = 0; k < y_pairs; ++k) ys[k] = Y.lo + Y.length() * k / (y_pairs - 1);

  PSetMembership out;
  out.worst_violation = -std::numeric_limits<double>::infinity();
  for (int a = 0; a + 1 < y_pairs; ++a) {
    const std::vector<Point2> verts = trace_level_curve(cost, x_tilde, ys[a], curve_resolution).vertices();
    for (int b = a + 1; b < y_pairs; ++b) {
      const double ref = cost.raw_dcdy(x_tilde, ys[b]);
      for (const auto& v : verts) out.worst_violation = std::max(out.worst_violation, ref - cost.raw_dcdy(v, ys[b]));
      ++out.pairs;
    }
  }
  out.member = out.worst_violation <= tolerance;
  return out;
}

struct McpResult {
  bool holds = false;
  double band_mass = 0.0;
  double nu_mass = 0.0;
  double slack = 0.0;
};

/// Mass comparison on one interval [y0, y1]: mu of the band swept by
/// L_xt(y), y in [y0, y1], against nu([y0, y1]). The band is the set of cells
/// where g(x, y) = dc/dy(x, y) - dc/dy(xt, y) changes sign over a y grid.
/// Holds when band_mass < nu_mass - slack (default slack 2/N).
inline McpResult mcp_check(const CostModel& cost, const SourceMeasure& mu, const TargetMeasure& nu,
                           Point2 x_tilde, double y0, double y1, int y_band_samples = 16,
                           double slack = -1.0) {
  if (!(y0 < y1)) throw ConfigError("mcp_check: need y0 < y1");
  if (y_band_samples < 2) throw ConfigError("mcp_check: need at least two band samples");
  detail::require_in_closure(cost, x_tilde, y0, "mcp_check");
  detail::require_in_closure(cost, x_tilde, y1, "mcp_check");
  std::vector<double> ys(y_band_samples), ref(y_band_samples);
  for (int k = 0; k < y_band_samples; ++k) {
    ys[k] = y0 + (y1 - y0) * k / (y_band_samples - 1);
    ref[k] = cost.raw_dcdy(x_tilde, ys[k]);
  }
  McpResult r;
  r.band_mass = mass_of_region(mu, [&](Point2 x) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int k = 0; k < y_band_samples; ++k) {
      const double g = cost.raw_dcdy(x, ys[k]) - ref[k];
      lo = std::min(lo, g);
      hi = std::max(hi, g);
      if (lo <= 0.0 && hi >= 0.0) return true;
    }
    return false;
  });
  r.nu_mass = nu.mass(y0, y1);
  r.slack = slack >= 0.0 ? slack : mu.mass_slack();
  r.holds = r.band_mass < r.nu_mass - r.slack;
  return r;
}

struct FoliationSample {
  Point2 x;
  double c_linearity_defect = 0.0;
  ConvexityVerdict convexity;
  int components = 0;  // of L_x(y) at the middle of the target interval
};

struct FoliationReport {
  std::string cost;
  std::vector<FoliationSample> samples;
  double max_c_linearity_defect = 0.0;
  bool all_convex = true;
  /// Set when some traced level curve has more than one component.
  bool disconnected_level_sets = false;
};

inline FoliationReport foliation_report(const CostModel& cost, std::span<const Point2> points,
                                        int y_samples = 32, int curve_resolution = 256) {
  FoliationReport rep;
  rep.cost = cost.name();
  for (const auto& x : points) {
    FoliationSample s;
    s.x = x;
    s.c_linearity_defect = c_linearity_defect(cost, x, y_samples);
    s.convexity = c_convexity_check(cost, x, y_samples);
    try {
      s.components = trace_level_curve(cost, x, cost.y_range().mid(), curve_resolution).connected_components();
    } catch (const EmptyCurve&) {
      s.components = 0;
    }
    rep.max_c_linearity_defect = std::max(rep.max_c_linearity_defect, s.c_linearity_defect);
    rep.all_convex = rep.all_convex && s.convexity.convex;
    rep.disconnected_level_sets = rep.disconnected_level_sets || s.components > 1;
    rep.samples.push_back(s);
  }
  return rep;
}

}  // namespace splitot
