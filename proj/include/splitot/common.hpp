// Basic geometric types, intervals, domains and the error hierarchy shared by
// every module of the library.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace splitot {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or parameter lies outside the closure of its domain.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

/// p is not (numerically) on the curve y -> D_x c(x, y).
class NotOnImage : public Error {
 public:
  using Error::Error;
};

class StencilOutsideDomain : public Error {
 public:
  using Error::Error;
};

/// No grid cell brackets the requested contour level.
class EmptyCurve : public Error {
 public:
  using Error::Error;
};

/// The mixed gradient of the cost vanishes, so (A2) fails at the point.
class DegeneratePoint : public Error {
 public:
  using Error::Error;
};

class NotCLinear : public Error {
 public:
  using Error::Error;
};

/// The mixed partial of the reduced cost changes sign; no monotone coupling.
class MixedSign : public Error {
 public:
  using Error::Error;
};

class DegenerateStall : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Points and vectors
// ---------------------------------------------------------------------------

struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x1 + o.x1, x2 + o.x2}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x1 - o.x1, x2 - o.x2}; }
  constexpr Vec2 operator-() const { return {-x1, -x2}; }
  constexpr Vec2 operator*(double s) const { return {x1 * s, x2 * s}; }
  constexpr Vec2 operator/(double s) const { return {x1 / s, x2 / s}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x1 * b.x1 + a.x2 * b.x2; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x1 * b.x2 - a.x2 * b.x1; }
inline double norm(Vec2 v) { return std::hypot(v.x1, v.x2); }
/// Rotation by +90 degrees.
constexpr Vec2 perp(Vec2 v) { return {-v.x2, v.x1}; }

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr Point2 operator+(Vec2 v) const { return {x1 + v.x1, x2 + v.x2}; }
  constexpr Point2 operator-(Vec2 v) const { return {x1 - v.x1, x2 - v.x2}; }
  constexpr Vec2 operator-(Point2 o) const { return {x1 - o.x1, x2 - o.x2}; }
  constexpr bool operator==(const Point2&) const = default;

  bool finite() const { return std::isfinite(x1) && std::isfinite(x2); }
};

inline double distance(Point2 a, Point2 b) { return norm(a - b); }

// ---------------------------------------------------------------------------
// Intervals and planar domains
// ---------------------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  double length() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double t, double tol = 0.0) const { return t >= lo - tol && t <= hi + tol; }
  double clamp(double t) const { return t < lo ? lo : (t > hi ? hi : t); }
};

struct Rect {
  Interval x1;
  Interval x2;

  bool contains(Point2 p) const { return x1.contains(p.x1) && x2.contains(p.x2); }
  Point2 center() const { return {x1.mid(), x2.mid()}; }
  double diagonal() const { return std::hypot(x1.length(), x2.length()); }
  Point2 clamp(Point2 p) const { return {x1.clamp(p.x1), x2.clamp(p.x2)}; }
};

/// A bounded planar set given by a bounding rectangle and an indicator of its
/// closure. Points outside the rectangle are never members.
struct Domain {
  std::string name;
  Rect bounds;
  std::function<bool(Point2)> indicator;

  bool contains(Point2 p) const { return bounds.contains(p) && (!indicator || indicator(p)); }
};

namespace domains {

inline Domain unit_square() {
  return {"unit_square", {{0.0, 1.0}, {0.0, 1.0}}, nullptr};
}

inline Domain rectangle(Interval x1, Interval x2) {
  return {"rectangle", {x1, x2}, nullptr};
}

/// {x1 >= 0, x2 >= 0, |x| <= 1}
inline Domain quarter_disk() {
  return {"quarter_disk",
          {{0.0, 1.0}, {0.0, 1.0}},
          [](Point2 p) { return p.x1 >= 0.0 && p.x2 >= 0.0 && p.x1 * p.x1 + p.x2 * p.x2 <= 1.0; }};
}

/// Smooth profile that is flat on (-1, 0] and rises to 1 at t = 1:
/// phi(t) = exp(1 - 1/t^2) for t > 0.
inline double shelf_profile(double t) {
  if (t <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / (t * t));
}

/// Inverse of shelf_profile on (0, 1].
inline double shelf_profile_inverse(double z) { return 1.0 / std::sqrt(1.0 - std::log(z)); }

/// {-1 <= x1 <= 1, -1 <= x2 <= shelf_profile(x1)}
inline Domain shelf() {
  return {"shelf",
          {{-1.0, 1.0}, {-1.0, 1.0}},
          [](Point2 p) { return p.x2 <= shelf_profile(p.x1); }};
}

}  // namespace domains

inline constexpr double kPi = 3.14159265358979323846;

}  // namespace splitot
