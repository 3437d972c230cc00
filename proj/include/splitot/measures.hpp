// Grid quadrature for the source marginal on a planar domain and a cumulative
// table for the target marginal on an interval.
#pragma once

#include <algorithm>
#include <span>
#include <sstream>
#include <vector>

#include "splitot/common.hpp"

namespace splitot {

/// Source marginal mu = f(x) dx discretised by the midpoint rule on an N x N
/// grid over the bounding rectangle. Cells whose centre lies outside the
/// domain get zero mass and are not stored.
class SourceMeasure {
 public:
  struct Cell {
    Point2 center;
    double mass;
  };

  SourceMeasure(Domain domain, std::function<double(Point2)> density, int n)
      : domain_(std::move(domain)), density_(std::move(density)), n_(n) {
    if (n_ < 1) throw ConfigError("SourceMeasure: grid resolution must be >= 1");
    if (!density_) throw ConfigError("SourceMeasure: missing density");
    const Rect& r = domain_.bounds;
    h1_ = r.x1.length() / n_;
    h2_ = r.x2.length() / n_;
    double total = 0.0;
    cells_.reserve(static_cast<std::size_t>(n_) * n_);
    for (int j = 0; j < n_; ++j) {
      for (int i = 0; i < n_; ++i) {
        const Point2 c{r.x1.lo + (i + 0.5) * h1_, r.x2.lo + (j + 0.5) * h2_};
        if (!domain_.contains(c)) continue;
        const double f = density_(c);
        if (f < 0.0) throw ConfigError("SourceMeasure: negative density");
        if (f == 0.0) continue;
        const double m = f * h1_ * h2_;
        cells_.push_back({c, m});
        total += m;
      }
    }
    if (!(total > 0.0)) throw ConfigError("SourceMeasure: zero total mass on domain '" + domain_.name + "'");
    scale_ = 1.0 / total;
    for (auto& c : cells_) c.mass *= scale_;
    cells_.shrink_to_fit();
  }

  static SourceMeasure uniform(Domain domain, int n) {
    return SourceMeasure(std::move(domain), [](Point2) { return 1.0; }, n);
  }

  const Domain& domain() const { return domain_; }
  int resolution() const { return n_; }
  double cell_area() const { return h1_ * h2_; }
  Vec2 cell_size() const { return {h1_, h2_}; }
  std::span<const Cell> cells() const { return cells_; }
  double total_mass() const {
    double t = 0.0;
    for (const auto& c : cells_) t += c.mass;
    return t;
  }
  /// Factor that normalises the supplied density to unit mass.
  double normalization() const { return scale_; }

  /// Normalised density; zero outside the domain.
  double density(Point2 x) const { return domain_.contains(x) ? scale_ * density_(x) : 0.0; }
  /// Normalised density formula without the membership test, for points known
  /// to lie on the domain boundary.
  double density_unclipped(Point2 x) const { return scale_ * density_(x); }

  /// Default slack separating "equal" from "strictly less" for masses: two
  /// grid rows.
  double mass_slack() const { return 2.0 / n_; }

 private:
  Domain domain_;
  std::function<double(Point2)> density_;
  int n_;
  double h1_ = 0.0, h2_ = 0.0;
  double scale_ = 1.0;
  std::vector<Cell> cells_;
};

using RegionPredicate = std::function<bool(Point2)>;

/// Sum of cell masses whose centres satisfy the predicate.
template <class Pred>
double mass_of_region(const SourceMeasure& mu, Pred&& region) {
  double m = 0.0;
  for (const auto& c : mu.cells())
    if (region(c.center)) m += c.mass;
  return m;
}

/// Target marginal nu = g(y) dy on [a, b] stored as a cumulative table over
/// M equal subintervals (midpoint rule), linearly interpolated.
class TargetMeasure {
 public:
  TargetMeasure(Interval range, std::function<double(double)> density, int m = 2048)
      : range_(range), density_(std::move(density)), m_(m) {
    if (m_ < 1) throw ConfigError("TargetMeasure: resolution must be >= 1");
    if (!(range_.hi > range_.lo)) throw ConfigError("TargetMeasure: empty interval");
    if (!density_) throw ConfigError("TargetMeasure: missing density");
    cdf_.assign(m_ + 1, 0.0);
    const double dy = range_.length() / m_;
    for (int k = 0; k < m_; ++k) {
      const double g = density_(range_.lo + (k + 0.5) * dy);
      if (g < 0.0) throw ConfigError("TargetMeasure: negative density");
      cdf_[k + 1] = cdf_[k] + g * dy;
    }
    const double total = cdf_.back();
    if (!(total > 0.0)) throw ConfigError("TargetMeasure: zero total mass");
    scale_ = 1.0 / total;
    for (auto& c : cdf_) c *= scale_;
    cdf_.back() = 1.0;
  }

  static TargetMeasure uniform(Interval range, int m = 2048) {
    return TargetMeasure(range, [](double) { return 1.0; }, m);
  }

  const Interval& range() const { return range_; }
  int resolution() const { return m_; }
  double density(double y) const { return range_.contains(y) ? scale_ * density_(y) : 0.0; }

  /// nu([a, y)).
  double cdf(double y) const {
    if (!std::isfinite(y) || !range_.contains(y, 1e-12 * (1.0 + range_.length()))) {
      std::ostringstream os;
      os << "nu_cdf: y = " << y << " outside [" << range_.lo << ", " << range_.hi << "]";
      throw OutOfDomain(os.str());
    }
    const double t = (range_.clamp(y) - range_.lo) / range_.length() * m_;
    const int k = std::min(m_ - 1, static_cast<int>(t));
    const double w = t - k;
    return cdf_[k] + w * (cdf_[k + 1] - cdf_[k]);
  }

  /// Least y with cdf(y) >= q.
  double quantile(double q) const {
    if (!(q >= 0.0 && q <= 1.0)) {
      std::ostringstream os;
      os << "nu_quantile: q = " << q << " outside [0, 1]";
      throw OutOfDomain(os.str());
    }
    if (q <= 0.0) return range_.lo;
    const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), q);
    const int k = static_cast<int>(it - cdf_.begin());  // cdf_[k-1] < q <= cdf_[k]
    const double dy = range_.length() / m_;
    const double lo = cdf_[k - 1], hi = cdf_[k];
    const double w = hi > lo ? (q - lo) / (hi - lo) : 0.0;
    return range_.lo + (k - 1 + w) * dy;
  }

  /// nu of [y0, y1].
  double mass(double y0, double y1) const { return cdf(y1) - cdf(y0); }

 private:
  Interval range_;
  std::function<double(double)> density_;
  int m_;
  double scale_ = 1.0;
  std::vector<double> cdf_;
};

inline double nu_cdf(const TargetMeasure& nu, double y) { return nu.cdf(y); }
inline double nu_quantile(const TargetMeasure& nu, double q) { return nu.quantile(q); }

}  // namespace splitot
