// Marching-squares extraction of the level sets
//   L_x(y) = { xb in X : dc/dy(xb, y) = dc/dy(x, y) }
// as polylines clipped to the domain closure.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "splitot/cost_model.hpp"

namespace splitot {

struct LevelCurve {
  Point2 anchor;
  double level_y = 0.0;
  double level_value = 0.0;
  /// One polyline per connected component. Closed loops repeat their first
  /// vertex at the end.
  std::vector<std::vector<Point2>> polylines;
  std::vector<std::vector<double>> segment_lengths;

  int connected_components() const { return static_cast<int>(polylines.size()); }

  double length() const {
    double s = 0.0;
    for (const auto& seg : segment_lengths)
      for (double l : seg) s += l;
    return s;
  }

  std::size_t vertex_count() const {
    std::size_t n = 0;
    for (const auto& p : polylines) n += p.size();
    return n;
  }

  std::vector<Point2> vertices() const {
    std::vector<Point2> out;
    out.reserve(vertex_count());
    for (const auto& p : polylines) out.insert(out.end(), p.begin(), p.end());
    return out;
  }
};

/// Samples x -> dc/dy(x, y) once on a resolution x resolution node grid over
/// the bounding rectangle so that many levels can be traced from one field.
class ContourTracer {
 public:
  ContourTracer(CostModel cost, double y, int resolution)
      : cost_(std::move(cost)), y_(y), res_(resolution) {
    if (res_ < 2) throw ConfigError("ContourTracer: resolution must be >= 2");
    const Rect& r = cost_.domain().bounds;
    dx_ = r.x1.length() / (res_ - 1);
    dy_ = r.x2.length() / (res_ - 1);
    values_.resize(static_cast<std::size_t>(res_) * res_);
    field_min_ = std::numeric_limits<double>::infinity();
    field_max_ = -field_min_;
    for (int j = 0; j < res_; ++j) {
      for (int i = 0; i < res_; ++i) {
        const Point2 p = node(i, j);
        const double v = cost_.raw_dcdy(p, y_);
        values_[idx(i, j)] = v;
        if (cost_.domain().contains(p)) {
          field_min_ = std::min(field_min_, v);
          field_max_ = std::max(field_max_, v);
        }
      }
    }
  }

  const CostModel& cost() const { return cost_; }
  double y() const { return y_; }
  int resolution() const { return res_; }
  /// Range of the sampled field over nodes inside the domain closure.
  double field_min() const { return field_min_; }
  double field_max() const { return field_max_; }

  LevelCurve trace(double level, Point2 anchor) const {
    LevelCurve out;
    out.anchor = anchor;
    out.level_y = y_;
    out.level_value = level;

    std::unordered_map<std::int64_t, Point2> points;
    std::unordered_map<std::int64_t, std::array<std::int64_t, 2>> links;
    std::unordered_map<std::int64_t, int> degree;
    std::vector<std::int64_t> order;

    auto crossing = [&](std::int64_t id, int ia, int ja, int ib, int jb) {
      if (points.count(id)) return;
      const double va = values_[idx(ia, ja)] - level;
      const double vb = values_[idx(ib, jb)] - level;
      const Point2 pa = node(ia, ja), pb = node(ib, jb);
      double t = va / (va - vb);
      const Vec2 e = pb - pa;
      const double len = norm(e);
      // One Newton step along the edge.
      const Point2 p0 = pa + e * t;
      const double f = cost_.raw_dcdy(p0, y_) - level;
      const double fp = dot(cost_.raw_grad_x_dcdy(p0, y_), e / len);
      if (fp != 0.0 && std::isfinite(fp)) t = std::clamp(t - f / fp / len, 0.0, 1.0);
      points.emplace(id, pa + e * t);
      order.push_back(id);
    };
    auto link = [&](std::int64_t a, std::int64_t b) {
      links[a][degree[a]++] = b;
      links[b][degree[b]++] = a;
    };

    const std::int64_t n1 = res_ - 1;
    const std::int64_t h_count = n1 * res_;
    auto h_edge = [&](int i, int j) { return static_cast<std::int64_t>(j) * n1 + i; };
    auto v_edge = [&](int i, int j) { return h_count + static_cast<std::int64_t>(i) * n1 + j; };

    for (int j = 0; j + 1 < res_; ++j) {
      for (int i = 0; i + 1 < res_; ++i) {
        const bool bl = values_[idx(i, j)] >= level;
        const bool br = values_[idx(i + 1, j)] >= level;
        const bool tr = values_[idx(i + 1, j + 1)] >= level;
        const bool tl = values_[idx(i, j + 1)] >= level;
        const int code = (bl ? 1 : 0) | (br ? 2 : 0) | (tr ? 4 : 0) | (tl ? 8 : 0);
        if (code == 0 || code == 15) continue;

        const std::int64_t bottom = h_edge(i, j), top = h_edge(i, j + 1);
        const std::int64_t left = v_edge(i, j), right = v_edge(i + 1, j);
        if (bl != br) crossing(bottom, i, j, i + 1, j);
        if (tl != tr) crossing(top, i, j + 1, i + 1, j + 1);
        if (bl != tl) crossing(left, i, j, i, j + 1);
        if (br != tr) crossing(right, i + 1, j, i + 1, j + 1);

        if (code == 5 || code == 10) {
          const double center = 0.25 * (values_[idx(i, j)] + values_[idx(i + 1, j)] +
                                        values_[idx(i + 1, j + 1)] + values_[idx(i, j + 1)]);
          const bool c = center >= level;
          if ((code == 5) == c) {  // br and tl isolated
            link(bottom, right);
            link(top, left);
          } else {  // bl and tr isolated
            link(bottom, left);
            link(top, right);
          }
          continue;
        }
        std::array<std::int64_t, 2> ends{};
        int k = 0;
        if (bl != br) ends[k++] = bottom;
        if (br != tr) ends[k++] = right;
        if (tl != tr) ends[k++] = top;
        if (bl != tl) ends[k++] = left;
        link(ends[0], ends[1]);
      }
    }

    if (order.empty()) throw EmptyCurve("no grid cell brackets the contour level");

    // Join segments into chains: open chains first (from degree-1 ends), then loops.
    std::sort(order.begin(), order.end());
    std::unordered_map<std::int64_t, bool> used;
    std::vector<std::vector<Point2>> chains;
    auto walk = [&](std::int64_t start) {
      std::vector<Point2> chain;
      std::int64_t prev = -1, cur = start;
      while (true) {
        used[cur] = true;
        chain.push_back(points.at(cur));
        std::int64_t next = -1;
        const int d = degree[cur];
        for (int k = 0; k < d; ++k) {
          const std::int64_t cand = links[cur][k];
          if (cand != prev && !used[cand]) {
            next = cand;
            break;
          }
        }
        if (next < 0) {
          // Close loops back onto the start vertex.
          if (d == 2 && cur != start && (links[cur][0] == start || links[cur][1] == start) && chain.size() > 2)
            chain.push_back(points.at(start));
          break;
        }
        prev = cur;
        cur = next;
      }
      chains.push_back(std::move(chain));
    };
    for (auto id : order)
      if (!used[id] && degree[id] == 1) walk(id);
    for (auto id : order)
      if (!used[id]) walk(id);

    for (auto& chain : chains) {
      const std::size_t before = out.polylines.size();
      clip(chain, level, out.polylines);
      // A closed loop cut by the boundary: the last piece continues into the first.
      const bool closed = chain.size() > 2 && chain.front() == chain.back();
      if (closed && out.polylines.size() - before >= 2 && cost_.domain().contains(chain.front())) {
        auto last = std::move(out.polylines.back());
        out.polylines.pop_back();
        auto& first = out.polylines[before];
        last.insert(last.end(), first.begin() + 1, first.end());
        first = std::move(last);
      }
    }
    if (out.polylines.empty()) throw EmptyCurve("level curve lies outside the domain");

    for (const auto& pl : out.polylines) {
      std::vector<double> lens;
      lens.reserve(pl.size() - 1);
      for (std::size_t k = 1; k < pl.size(); ++k) lens.push_back(distance(pl[k - 1], pl[k]));
      out.segment_lengths.push_back(std::move(lens));
    }
    return out;
  }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * res_ + i; }
  Point2 node(int i, int j) const {
    const Rect& r = cost_.domain().bounds;
    return {i == res_ - 1 ? r.x1.hi : r.x1.lo + i * dx_, j == res_ - 1 ? r.x2.hi : r.x2.lo + j * dy_};
  }

  /// Point on the domain boundary between an inside and an outside vertex,
  /// projected back onto the level set when the projection stays inside.
  Point2 boundary_point(Point2 in, Point2 outside, double level) const {
    const Domain& dom = cost_.domain();
    for (int it = 0; it < 60; ++it) {
      const Point2 m = in + (outside - in) * 0.5;
      if (dom.contains(m)) in = m;
      else outside = m;
    }
    const Vec2 g = cost_.raw_grad_x_dcdy(in, y_);
    const double gg = dot(g, g);
    if (gg > 0.0) {
      const Point2 proj = in - g * ((cost_.raw_dcdy(in, y_) - level) / gg);
      if (dom.contains(proj)) return proj;
    }
    return in;
  }

  void clip(const std::vector<Point2>& chain, double level, std::vector<std::vector<Point2>>& out) const {
    const Domain& dom = cost_.domain();
    std::vector<Point2> cur;
    auto push = [&](Point2 p) {
      if (cur.empty() || !(cur.back() == p)) cur.push_back(p);
    };
    auto flush = [&] {
      if (cur.size() >= 2) out.push_back(std::move(cur));
      cur.clear();
    };
    bool prev_in = false;
    for (std::size_t k = 0; k < chain.size(); ++k) {
      const Point2 p = chain[k];
      const bool in = dom.contains(p);
      if (k > 0 && in != prev_in) {
        const Point2 b = in ? boundary_point(p, chain[k - 1], level) : boundary_point(chain[k - 1], p, level);
        if (in) {
          push(b);
        } else {
          push(b);
          flush();
        }
      }
      if (in) push(p);
      prev_in = in;
    }
    flush();
  }

  CostModel cost_;
  double y_;
  int res_;
  double dx_ = 0.0, dy_ = 0.0;
  std::vector<double> values_;
  double field_min_ = 0.0, field_max_ = 0.0;
};

inline constexpr int kDefaultCurveResolution = 512;

/// Traces L_x(y) through x on a resolution x resolution grid.
inline LevelCurve trace_level_curve(const CostModel& cost, Point2 x, double y,
                                    int resolution = kDefaultCurveResolution) {
  detail::require_in_closure(cost, x, y, "trace_level_curve");
  return ContourTracer(cost, y, resolution).trace(cost.raw_dcdy(x, y), x);
}

/// Traces { xb : dc/dy(xb, y) = level }.
inline LevelCurve trace_level_set(const CostModel& cost, double level, double y,
                                  int resolution = kDefaultCurveResolution) {
  if (!cost.y_range().contains(y, 1e-12)) throw OutOfDomain("trace_level_set: y outside target interval");
  return ContourTracer(cost, y, resolution).trace(level, Point2{NAN, NAN});
}

/// Largest |dc/dy(v, y) - level| over the curve's vertices.
inline double max_level_residual(const CostModel& cost, const LevelCurve& curve) {
  double worst = 0.0;
  for (const auto& pl : curve.polylines)
    for (const auto& v : pl) worst = std::max(worst, std::abs(cost.raw_dcdy(v, curve.level_y) - curve.level_value));
  return worst;
}

/// CSV with columns curve,component,vertex,x1,x2.
inline void write_level_curves_csv(std::ostream& os, std::span<const LevelCurve> curves) {
  os << "curve,component,vertex,x1,x2\n";
  os << std::setprecision(10);
  for (std::size_t c = 0; c < curves.size(); ++c)
    for (std::size_t k = 0; k < curves[c].polylines.size(); ++k)
      for (std::size_t v = 0; v < curves[c].polylines[k].size(); ++v)
        os << c << ',' << k << ',' << v << ',' << curves[c].polylines[k][v].x1 << ','
           << curves[c].polylines[k][v].x2 << '\n';
}

}  // namespace splitot
