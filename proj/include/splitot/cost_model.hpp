// Cost functions c(x, y) on a planar source and an interval target, their
// partial derivatives, the c-exponential map and the Ma-Trudinger-Wang
// curvature evaluator.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "splitot/common.hpp"

namespace splitot {

/// Optional analytic partials. Any member left empty is replaced by central
/// finite differences.
struct CostPartials {
  std::function<double(Point2, double)> dcdy;        // dc/dy
  std::function<Vec2(Point2, double)> grad_x;        // D_x c
  std::function<Vec2(Point2, double)> grad_x_dcdy;   // D^2_{xy} c
};

class CostModel {
 public:
  using Eval = std::function<double(Point2, double)>;

  CostModel(std::string name, Eval eval, Domain domain, Interval y_range,
            CostPartials partials = {}, double fd_step = 1e-3)
      : name_(std::move(name)),
        eval_(std::move(eval)),
        domain_(std::move(domain)),
        y_range_(y_range),
        partials_(std::move(partials)),
        fd_step_(fd_step) {
    if (!eval_) throw ConfigError("CostModel '" + name_ + "': missing evaluator");
    if (!(fd_step_ > 0.0)) throw ConfigError("CostModel '" + name_ + "': fd_step must be positive");
    if (!(y_range_.hi > y_range_.lo)) throw ConfigError("CostModel '" + name_ + "': empty target interval");
  }

  const std::string& name() const { return name_; }
  const Domain& domain() const { return domain_; }
  const Interval& y_range() const { return y_range_; }
  double fd_step() const { return fd_step_; }
  const CostPartials& partials() const { return partials_; }

  bool has_analytic_dcdy() const { return static_cast<bool>(partials_.dcdy); }
  bool has_analytic_grad_x() const { return static_cast<bool>(partials_.grad_x); }
  bool has_analytic_grad_x_dcdy() const { return static_cast<bool>(partials_.grad_x_dcdy); }

  /// Copy of this cost with every analytic partial dropped.
  CostModel finite_difference_only() const {
    return CostModel(name_ + "/fd", eval_, domain_, y_range_, {}, fd_step_);
  }

  CostModel with_y_range(Interval y) const {
    return CostModel(name_, eval_, domain_, y, partials_, fd_step_);
  }

  bool in_closure(Point2 x, double y, double tol = 1e-12) const {
    return domain_.contains(x) && y_range_.contains(y, tol);
  }

  double operator()(Point2 x, double y) const { return eval_(x, y); }

  // Unchecked evaluators. Finite differences here always use full central
  // stencils and may sample outside the domain; they back the grid sweeps
  // (contouring, region masses) that run over the whole bounding rectangle.

  double raw_dcdy(Point2 x, double y) const {
    if (partials_.dcdy) return partials_.dcdy(x, y);
    const double h = fd_step_;
    return central5([&](double t) { return eval_(x, t); }, y, h);
  }

  Vec2 raw_grad_x(Point2 x, double y) const {
    if (partials_.grad_x) return partials_.grad_x(x, y);
    const double h = fd_step_;
    return {central5([&](double t) { return eval_({t, x.x2}, y); }, x.x1, h),
            central5([&](double t) { return eval_({x.x1, t}, y); }, x.x2, h)};
  }

  Vec2 raw_grad_x_dcdy(Point2 x, double y) const {
    if (partials_.grad_x_dcdy) return partials_.grad_x_dcdy(x, y);
    const double h = fd_step_;
    return {central5([&](double t) { return raw_dcdy({t, x.x2}, y); }, x.x1, h),
            central5([&](double t) { return raw_dcdy({x.x1, t}, y); }, x.x2, h)};
  }

  /// Five-point central difference; equals Richardson extrapolation of the
  /// three-point formula at steps h and 2h.
  template <class F>
  static double central5(F&& f, double t, double h) {
    return (-f(t + 2 * h) + 8 * f(t + h) - 8 * f(t - h) + f(t - 2 * h)) / (12 * h);
  }

 private:
  std::string name_;
  Eval eval_;
  Domain domain_;
  Interval y_range_;
  CostPartials partials_;
  double fd_step_;
};

// ---------------------------------------------------------------------------
// Checked partial derivatives
// ---------------------------------------------------------------------------

namespace detail {

inline void require_in_closure(const CostModel& cost, Point2 x, double y, const char* what) {
  if (!x.finite() || !std::isfinite(y) || !cost.in_closure(x, y)) {
    std::ostringstream os;
    os << what << ": (" << x.x1 << ", " << x.x2 << "; " << y << ") is outside the domain of cost '"
       << cost.name() << "'";
    throw OutOfDomain(os.str());
  }
}

/// Derivative of f at t0 with step h. Uses the five-point central stencil when
/// every node is admissible, otherwise a one-sided second-order stencil.
template <class F, class Admissible>
double shrinking_derivative(F&& f, double t0, double h, Admissible&& ok) {
  if (ok(t0 - 2 * h) && ok(t0 + 2 * h) && ok(t0 - h) && ok(t0 + h))
    return CostModel::central5(f, t0, h);
  if (ok(t0 + h) && ok(t0 + 2 * h)) return (-3 * f(t0) + 4 * f(t0 + h) - f(t0 + 2 * h)) / (2 * h);
  if (ok(t0 - h) && ok(t0 - 2 * h)) return (3 * f(t0) - 4 * f(t0 - h) + f(t0 - 2 * h)) / (2 * h);
  throw StencilOutsideDomain("finite-difference stencil does not fit inside the domain");
}

}  // namespace detail

/// dc/dy at (x, y); analytic when supplied, otherwise a finite difference whose
/// stencil is shrunk to one side near the ends of the target interval.
inline double dcdy(const CostModel& cost, Point2 x, double y) {
  detail::require_in_closure(cost, x, y, "dcdy");
  if (cost.has_analytic_dcdy()) return cost.raw_dcdy(x, y);
  const Interval& Y = cost.y_range();
  return detail::shrinking_derivative([&](double t) { return cost(x, t); }, y, cost.fd_step(),
                                      [&](double t) { return Y.contains(t, 1e-12); });
}

/// D_x c(x, y).
inline Vec2 grad_x_c(const CostModel& cost, Point2 x, double y) {
  detail::require_in_closure(cost, x, y, "grad_x_c");
  if (cost.has_analytic_grad_x()) return cost.raw_grad_x(x, y);
  const auto& dom = cost.domain();
  const double h = cost.fd_step();
  return {detail::shrinking_derivative([&](double t) { return cost({t, x.x2}, y); }, x.x1, h,
                                       [&](double t) { return dom.contains({t, x.x2}); }),
          detail::shrinking_derivative([&](double t) { return cost({x.x1, t}, y); }, x.x2, h,
                                       [&](double t) { return dom.contains({x.x1, t}); })};
}

/// D^2_{xy} c(x, y), i.e. the gradient in x of dc/dy. Its non-vanishing is
/// condition (A2) for a one-dimensional target.
inline Vec2 grad_x_dcdy(const CostModel& cost, Point2 x, double y) {
  detail::require_in_closure(cost, x, y, "grad_x_dcdy");
  if (cost.has_analytic_grad_x_dcdy()) return cost.raw_grad_x_dcdy(x, y);
  const auto& dom = cost.domain();
  const double h = cost.fd_step();
  return {detail::shrinking_derivative([&](double t) { return cost.raw_dcdy({t, x.x2}, y); }, x.x1,
                                       h, [&](double t) { return dom.contains({t, x.x2}); }),
          detail::shrinking_derivative([&](double t) { return cost.raw_dcdy({x.x1, t}, y); }, x.x2,
                                       h, [&](double t) { return dom.contains({x.x1, t}); })};
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

struct DiagnosticReport {
  std::string check;
  bool passed = false;
  double value = 0.0;  // the measured extreme (min or max, depending on the check)
  double tolerance = 0.0;
  std::size_t samples = 0;
  std::size_t skipped = 0;
  std::string note;
};

/// Minimum of |D^2_{xy} c| over a grid of the domain closure times the target
/// interval. Fails when the minimum is below `tolerance`.
inline DiagnosticReport check_a2(const CostModel& cost, int grid_resolution, double tolerance = 1e-8) {
  if (grid_resolution < 2) throw ConfigError("check_a2: grid_resolution must be >= 2");
  const Rect& r = cost.domain().bounds;
  const Interval& Y = cost.y_range();
  DiagnosticReport rep{"A2", false, std::numeric_limits<double>::infinity(), tolerance, 0, 0, {}};
  const double n1 = grid_resolution - 1;
  for (int i = 0; i < grid_resolution; ++i) {
    for (int j = 0; j < grid_resolution; ++j) {
      const Point2 x{r.x1.lo + r.x1.length() * i / n1, r.x2.lo + r.x2.length() * j / n1};
      if (!cost.domain().contains(x)) continue;
      for (int k = 0; k < grid_resolution; ++k) {
        const double y = Y.lo + Y.length() * k / n1;
        rep.value = std::min(rep.value, norm(cost.raw_grad_x_dcdy(x, y)));
        ++rep.samples;
      }
    }
  }
  rep.passed = rep.samples > 0 && rep.value >= tolerance;
  if (rep.samples == 0) rep.note = "no grid node inside the domain";
  return rep;
}

// ---------------------------------------------------------------------------
// c-exponential
// ---------------------------------------------------------------------------

inline constexpr double kDefaultImageTolerance = 1e-6;

/// Inverse of y -> D_x c(x, y): the y in the target closure with
/// D_x c(x, y) = p. The minimiser of |D_x c(x, y) - p|^2 is bracketed on a
/// 256-point grid, refined by golden-section search and polished with
/// Gauss-Newton steps.
inline double c_exp(const CostModel& cost, Point2 x, Vec2 p, double tolerance = kDefaultImageTolerance) {
  const Interval& Y = cost.y_range();
  detail::require_in_closure(cost, x, Y.mid(), "c_exp");
  auto residual2 = [&](double y) {
    const Vec2 r = cost.raw_grad_x(x, y) - p;
    return dot(r, r);
  };

  constexpr int kGrid = 256;
  const double dy = Y.length() / (kGrid - 1);
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k < kGrid; ++k) {
    const double v = residual2(Y.lo + k * dy);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }

  double lo = Y.lo + std::max(0, best - 1) * dy;
  double hi = Y.lo + std::min(kGrid - 1, best + 1) * dy;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - inv_phi * (hi - lo);
  double b = lo + inv_phi * (hi - lo);
  double fa = residual2(a), fb = residual2(b);
  for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + std::abs(lo)); ++it) {
    if (fa < fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - inv_phi * (hi - lo);
      fa = residual2(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + inv_phi * (hi - lo);
      fb = residual2(b);
    }
  }
  double y = 0.5 * (lo + hi);

  for (int it = 0; it < 8; ++it) {
    const Vec2 r = cost.raw_grad_x(x, y) - p;
    const Vec2 jr = cost.raw_grad_x_dcdy(x, y);
    const double jj = dot(jr, jr);
    if (jj <= 0.0) break;
    const double next = Y.clamp(y - dot(r, jr) / jj);
    if (!(residual2(next) <= dot(r, r))) break;
    const bool done = std::abs(next - y) <= 1e-16 * (1.0 + std::abs(y));
    y = next;
    if (done) break;
  }

  const double res = std::sqrt(residual2(y));
  if (!(res <= tolerance)) {
    std::ostringstream os;
    os << "c_exp: p = (" << p.x1 << ", " << p.x2 << ") is not on D_x c(x, Y); residual " << res;
    throw NotOnImage(os.str());
  }
  return y;
}

// ---------------------------------------------------------------------------
// MTW curvature
// ---------------------------------------------------------------------------

struct MtwQuery {
  Point2 x;
  double y = 0.0;
  Vec2 u;          // source direction
  double v = 1.0;  // target direction

  MtwQuery normalized() const {
    const double n = norm(u);
    return {x, y, n > 0 ? u / n : u, v};
  }
};

inline constexpr double kDefaultMtwStep = 1e-2;

/// -(3/2) d^4/ds^2 dt^2 of c(x + s u, c_exp_x(p + t q)) at s = t = 0 with
/// p = D_x c(x, y) and q = D^2_{xy} c(x, y) v. Nested second differences at
/// steps h and h/2, combined by Richardson extrapolation.
inline double mtw_curvature(const CostModel& cost, const MtwQuery& q, double fd_step = kDefaultMtwStep) {
  detail::require_in_closure(cost, q.x, q.y, "mtw_curvature");
  const double h = fd_step;
  if (!cost.domain().contains(q.x + q.u * h) || !cost.domain().contains(q.x - q.u * h))
    throw StencilOutsideDomain("mtw_curvature: x +- h u leaves the domain");

  const Vec2 p = grad_x_c(cost, q.x, q.y);
  const Vec2 dir = grad_x_dcdy(cost, q.x, q.y) * q.v;

  auto second_mixed = [&](double step) {
    const double ts[3] = {-step, 0.0, step};
    double ys[3];
    for (int b = 0; b < 3; ++b) ys[b] = b == 1 ? q.y : c_exp(cost, q.x, p + dir * ts[b]);
    constexpr double w[3] = {1.0, -2.0, 1.0};
    double acc = 0.0;
    for (int a = 0; a < 3; ++a) {
      const Point2 xs = q.x + q.u * (step * (a - 1));
      for (int b = 0; b < 3; ++b) acc += w[a] * w[b] * cost(xs, ys[b]);
    }
    return acc / (step * step * step * step);
  };

  const double coarse = second_mixed(h);
  const double fine = second_mixed(0.5 * h);
  return -1.5 * (4.0 * fine - coarse) / 3.0;
}

struct A3Report : DiagnosticReport {
  std::size_t not_on_image = 0;
  std::size_t stencil_outside = 0;
  /// True when no query satisfies the side conditions of the strict form.
  bool vacuous = false;
};

/// Samples (x, y) pairs, takes v = 1 and the unit direction u with
/// u . D^2_{xy} c . v = 0, and reports the minimum MTW value.
///
/// For a one-dimensional target u . D^2_{xy} c . v = 0 with v != 0 forces
/// u . D^2_{xy} c = 0, so the strict form has no admissible query; strict mode
/// then reports a vacuous pass and still records the weak-form minimum.
inline A3Report check_a3(const CostModel& cost, int samples, bool strict, std::uint64_t seed = 7,
                         double weak_tolerance = 1e-4, double fd_step = kDefaultMtwStep) {
  A3Report rep;
  rep.check = strict ? "A3S" : "A3W";
  rep.tolerance = weak_tolerance;
  rep.value = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  const Rect& r = cost.domain().bounds;
  const Interval& Y = cost.y_range();
  std::uniform_real_distribution<double> u1(r.x1.lo, r.x1.hi), u2(r.x2.lo, r.x2.hi),
      uy(Y.lo + 0.1 * Y.length(), Y.hi - 0.1 * Y.length());

  int attempts = 0;
  while (static_cast<int>(rep.samples + rep.skipped) < samples && attempts < 100 * samples) {
    ++attempts;
    const Point2 x{u1(rng), u2(rng)};
    if (!cost.domain().contains(x)) continue;
    const double y = uy(rng);
    const Vec2 g = cost.raw_grad_x_dcdy(x, y);
    if (norm(g) == 0.0) {
      ++rep.skipped;
      continue;
    }
    const MtwQuery q = MtwQuery{x, y, perp(g), 1.0}.normalized();
    try {
      rep.value = std::min(rep.value, mtw_curvature(cost, q, fd_step));
      ++rep.samples;
    } catch (const NotOnImage&) {
      ++rep.not_on_image;
      ++rep.skipped;
    } catch (const StencilOutsideDomain&) {
      ++rep.stencil_outside;
      ++rep.skipped;
    }
  }

  if (strict) {
    rep.vacuous = true;
    rep.passed = true;
    rep.note = "strict form: no direction u satisfies u.D2c.v = 0 with u.D2c != 0 for a 1-D target";
  } else {
    rep.passed = rep.samples > 0 && rep.value >= -weak_tolerance;
    if (rep.samples == 0) rep.note = "no admissible query could be evaluated";
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Built-in costs
// ---------------------------------------------------------------------------

namespace costs {

/// c(x, y) = x2 y
inline CostModel bilinear(Domain domain = domains::unit_square(), Interval y = {0.0, 1.0}) {
  CostPartials d;
  d.dcdy = [](Point2 x, double) { return x.x2; };
  d.grad_x = [](Point2, double y) { return Vec2{0.0, y}; };
  d.grad_x_dcdy = [](Point2, double) { return Vec2{0.0, 1.0}; };
  return CostModel("bilinear", [](Point2 x, double y) { return x.x2 * y; }, std::move(domain), y,
                   std::move(d));
}

/// c(x, y) = -x1 cos y - x2 sin y
inline CostModel quarter_disk(Domain domain = domains::quarter_disk(), Interval y = {0.0, kPi / 2}) {
  CostPartials d;
  d.dcdy = [](Point2 x, double y) { return x.x1 * std::sin(y) - x.x2 * std::cos(y); };
  d.grad_x = [](Point2, double y) { return Vec2{-std::cos(y), -std::sin(y)}; };
  d.grad_x_dcdy = [](Point2, double y) { return Vec2{std::sin(y), -std::cos(y)}; };
  return CostModel("quarter_disk",
                   [](Point2 x, double y) { return -x.x1 * std::cos(y) - x.x2 * std::sin(y); },
                   std::move(domain), y, std::move(d));
}

/// c(x, y) = (x1 - y)^2
inline CostModel separable_quadratic(Domain domain = domains::unit_square(), Interval y = {0.0, 1.0}) {
  CostPartials d;
  d.dcdy = [](Point2 x, double y) { return -2.0 * (x.x1 - y); };
  d.grad_x = [](Point2 x, double y) { return Vec2{2.0 * (x.x1 - y), 0.0}; };
  d.grad_x_dcdy = [](Point2, double) { return Vec2{-2.0, 0.0}; };
  return CostModel("separable_quadratic",
                   [](Point2 x, double y) { return (x.x1 - y) * (x.x1 - y); }, std::move(domain), y,
                   std::move(d));
}

/// Reduced one-dimensional cost b(z, y) with its partials, used to build
/// foliated costs c(x, y) = b(q . x, y).
struct ReducedCost {
  std::function<double(double, double)> b;
  std::function<double(double, double)> b_z;
  std::function<double(double, double)> b_y;
  std::function<double(double, double)> b_zy;
};

/// c(x, y) = b(q . x, y) for a constant direction q. Every such cost is
/// c-linear: its level sets are the lines q . x = const for every y.
inline CostModel foliated(std::string name, Vec2 q, ReducedCost rb, Domain domain, Interval y) {
  CostPartials d;
  if (rb.b_y) d.dcdy = [q, f = rb.b_y](Point2 x, double t) { return f(dot(q, {x.x1, x.x2}), t); };
  if (rb.b_z)
    d.grad_x = [q, f = rb.b_z](Point2 x, double t) { return q * f(dot(q, {x.x1, x.x2}), t); };
  if (rb.b_zy)
    d.grad_x_dcdy = [q, f = rb.b_zy](Point2 x, double t) { return q * f(dot(q, {x.x1, x.x2}), t); };
  return CostModel(std::move(name),
                   [q, f = rb.b](Point2 x, double t) { return f(dot(q, {x.x1, x.x2}), t); },
                   std::move(domain), y, std::move(d));
}

/// b(z, y) = exp(z y), with D_zy b = exp(z y)(1 + z y) > 0 for z y > -1.
inline ReducedCost exp_product() {
  return {[](double z, double y) { return std::exp(z * y); },
          [](double z, double y) { return y * std::exp(z * y); },
          [](double z, double y) { return z * std::exp(z * y); },
          [](double z, double y) { return std::exp(z * y) * (1.0 + z * y); }};
}

}  // namespace costs

/// Name-keyed cost factories. `builtin()` holds "bilinear", "quarter_disk" and
/// "separable_quadratic"; further costs can be registered programmatically.
class CostRegistry {
 public:
  using Factory = std::function<CostModel(Domain, Interval)>;

  static CostRegistry builtin() {
    CostRegistry r;
    r.add("bilinear", [](Domain d, Interval y) { return costs::bilinear(std::move(d), y); });
    r.add("quarter_disk", [](Domain d, Interval y) { return costs::quarter_disk(std::move(d), y); });
    r.add("separable_quadratic",
          [](Domain d, Interval y) { return costs::separable_quadratic(std::move(d), y); });
    return r;
  }

  void add(const std::string& name, Factory f) { factories_[name] = std::move(f); }
  bool contains(const std::string& name) const { return factories_.count(name) > 0; }

  CostModel make(const std::string& name, Domain domain, Interval y) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) throw ConfigError("unknown cost '" + name + "'");
    return it->second(std::move(domain), y);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : factories_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, Factory> factories_;
};

}  // namespace splitot
