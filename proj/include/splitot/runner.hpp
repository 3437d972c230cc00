// Scenario runner: named checks grouped by stage, executed in dependency
// order against one scenario, with JSON and CSV artifacts.
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "splitot/geometry.hpp"
#include "splitot/oracle.hpp"
#include "splitot/quotient.hpp"
#include "splitot/scenario.hpp"
#include "splitot/splitting.hpp"

namespace splitot {

enum class Stage { Diagnose, Quotient, Split, Oracle, Compare };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Diagnose: return "diagnose";
    case Stage::Quotient: return "quotient";
    case Stage::Split: return "split";
    case Stage::Oracle: return "oracle";
    case Stage::Compare: return "compare";
  }
  return "?";
}

/// Stages selected by a subcommand name.
inline std::vector<Stage> stages_for(const std::string& command) {
  if (command == "diagnose") return {Stage::Diagnose};
  if (command == "quotient") return {Stage::Quotient};
  if (command == "split") return {Stage::Split};
  if (command == "oracle") return {Stage::Oracle};
  if (command == "compare") return {Stage::Compare};
  if (command == "all") return {Stage::Diagnose, Stage::Quotient, Stage::Split, Stage::Oracle, Stage::Compare};
  throw ConfigError("unknown command '" + command + "'");
}

struct CheckResult {
  std::string name;
  std::string stage;
  bool passed = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string expected;
  double tolerance = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
  std::string error;
  nlohmann::json details = nlohmann::json::object();
};

struct RunReport {
  std::string scenario;
  std::string command;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline nlohmann::json to_json(const CheckResult& c) {
  nlohmann::json j;
  j["name"] = c.name;
  j["stage"] = c.stage;
  j["passed"] = c.passed;
  j["value"] = std::isfinite(c.value) ? nlohmann::json(c.value) : nlohmann::json(nullptr);
  j["expected"] = c.expected;
  j["tolerance"] = std::isfinite(c.tolerance) ? nlohmann::json(c.tolerance) : nlohmann::json(nullptr);
  j["seconds"] = c.seconds;
  if (!c.error.empty()) j["error"] = c.error;
  j["details"] = c.details;
  return j;
}

inline nlohmann::json to_json(const RunReport& r, const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["command"] = r.command;
  j["passed"] = r.all_passed();
  j["seconds"] = r.seconds;
  j["config"] = {{"cost", cfg.cost},
                 {"domain", cfg.domain},
                 {"y_lo", cfg.y_lo},
                 {"y_hi", cfg.y_hi},
                 {"source_density", cfg.source_density},
                 {"target_density", cfg.target_density},
                 {"seed", cfg.seed},
                 {"resolutions",
                  {{"grid_n", cfg.res.grid_n},
                   {"nu_m", cfg.res.nu_m},
                   {"curve", cfg.res.curve},
                   {"y_scan", cfg.res.y_scan},
                   {"oracle_nx", cfg.res.oracle_nx},
                   {"oracle_ny", cfg.res.oracle_ny},
                   {"map_grid", cfg.res.map_grid},
                   {"ks_grid", cfg.res.ks_grid}}}};
  j["checks"] = nlohmann::json::array();
  for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
  return j;
}

/// Lazily computed per-scenario state shared between checks.
class ScenarioContext {
 public:
  explicit ScenarioContext(Scenario sc) : sc_(std::move(sc)) {}

  const Scenario& scenario() const { return sc_; }
  const ScenarioConfig& config() const { return sc_.config; }
  const CostModel& cost() const { return sc_.cost; }
  const SourceMeasure& mu() const { return sc_.mu; }
  const TargetMeasure& nu() const { return sc_.nu; }
  const std::string& name() const { return sc_.config.scenario; }
  bool c_linear() const { return sc_.config.cost != "quarter_disk"; }

  const SplittingProblem& splitting() {
    if (!sp_) sp_.emplace(sc_.cost, sc_.mu, sc_.nu, sc_.config.res.y_scan);
    return *sp_;
  }

  const MapField& map() {
    if (!map_) map_ = map_field(splitting(), sc_.config.res.map_grid);
    return *map_;
  }

  const MapField& ks_map() {
    if (!ks_) ks_ = map_field(splitting(), sc_.config.res.ks_grid);
    return *ks_;
  }

  /// Throws whatever build_quotient throws (e.g. NotCLinear); the error is
  /// cached and rethrown on later calls.
  const QuotientStructure& quotient() {
    if (quotient_error_) std::rethrow_exception(quotient_error_);
    if (!quotient_) {
      try {
        QuotientOptions opt;
        opt.curve_resolution = sc_.config.res.curve;
        quotient_.emplace(build_quotient(sc_.cost, sc_.mu, opt));
      } catch (...) {
        quotient_error_ = std::current_exception();
        throw;
      }
    }
    return *quotient_;
  }
  bool has_quotient() const { return quotient_.has_value(); }

  const DiscreteProblem& discrete() {
    if (!dp_) dp_ = discretize(sc_.cost, sc_.mu, sc_.nu, sc_.config.res.oracle_nx, sc_.config.res.oracle_ny);
    return *dp_;
  }

  const TransportPlan& plan() {
    if (!plan_) plan_ = solve_kantorovich(discrete());
    return *plan_;
  }
  bool has_plan() const { return plan_.has_value(); }

  /// Splitting map at the oracle's source atoms.
  const std::vector<MapValue>& map_at_atoms() {
    if (!atoms_map_) atoms_map_ = optimal_map_batch(splitting(), discrete().source_atoms());
    return *atoms_map_;
  }

  std::vector<LevelCurve>& level_curves() { return curves_; }
  bool has_map() const { return map_.has_value(); }

 private:
  Scenario sc_;
  std::optional<SplittingProblem> sp_;
  std::optional<MapField> map_, ks_;
  std::optional<QuotientStructure> quotient_;
  std::exception_ptr quotient_error_;
  std::optional<DiscreteProblem> dp_;
  std::optional<TransportPlan> plan_;
  std::optional<std::vector<MapValue>> atoms_map_;
  std::vector<LevelCurve> curves_;
};

struct CheckSpec {
  std::string name;
  Stage stage;
  std::set<std::string> scenarios;  // empty: every scenario
  std::function<void(ScenarioContext&, CheckResult&)> run;
};

namespace detail {

inline std::vector<Point2> probe_points(const Domain& dom, int per_axis) {
  std::vector<Point2> pts;
  const Rect& r = dom.bounds;
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j) {
      const Point2 x{r.x1.lo + r.x1.length() * (i + 0.5) / per_axis, r.x2.lo + r.x2.length() * (j + 0.5) / per_axis};
      if (dom.contains(x)) pts.push_back(x);
    }
  return pts;
}

inline std::vector<Point2> random_points(const Domain& dom, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Rect& r = dom.bounds;
  std::uniform_real_distribution<double> u1(r.x1.lo, r.x1.hi), u2(r.x2.lo, r.x2.hi);
  std::vector<Point2> pts;
  while (static_cast<int>(pts.size()) < count) {
    const Point2 x{u1(rng), u2(rng)};
    if (dom.contains(x)) pts.push_back(x);
  }
  return pts;
}

/// Area of the shelf domain, 2 + int_0^1 phi, by composite Simpson.
inline double shelf_area() {
  const int n = 2000;
  double s = domains::shelf_profile(0.0) + domains::shelf_profile(1.0);
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * domains::shelf_profile(static_cast<double>(k) / n);
  return 2.0 + s / (3.0 * n);
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

inline double le(CheckResult& r, double value, double tol, const std::string& what) {
  r.value = value;
  r.tolerance = tol;
  r.expected = what + " <= " + fmt(tol);
  r.passed = value <= tol;
  return value;
}

inline double ge(CheckResult& r, double value, double bound, const std::string& what) {
  r.value = value;
  r.tolerance = bound;
  r.expected = what + " >= " + fmt(bound);
  r.passed = value >= bound;
  return value;
}

inline void mtw_check(ScenarioContext& ctx, CheckResult& r) {
  const CostModel& c = ctx.cost();
  std::mt19937_64 rng(ctx.config().seed);
  const Rect& b = c.domain().bounds;
  const Interval& Y = c.y_range();
  std::uniform_real_distribution<double> u1(b.x1.lo, b.x1.hi), u2(b.x2.lo, b.x2.hi),
      uy(Y.lo + 0.1 * Y.length(), Y.hi - 0.1 * Y.length()), ang(0.0, 2 * kPi);
  double worst_random = 0.0, worst_tangent = 0.0;
  int random_ok = 0, tangent_ok = 0, attempts = 0, not_on_image = 0;
  while ((random_ok < 100 || (ctx.c_linear() && tangent_ok < 100)) && attempts < 20000) {
    ++attempts;
    const Point2 x{u1(rng), u2(rng)};
    if (!c.domain().contains(x)) continue;
    const double y = uy(rng);
    const double a = ang(rng);
    const bool tangent = ctx.c_linear() && tangent_ok < 100 && (random_ok >= 100 || attempts % 2 == 0);
    const Vec2 u = tangent ? perp(c.raw_grad_x_dcdy(x, y)) : Vec2{std::cos(a), std::sin(a)};
    try {
      const double m = std::abs(mtw_curvature(c, MtwQuery{x, y, u, 1.0}.normalized()));
      if (tangent) {
        worst_tangent = std::max(worst_tangent, m);
        ++tangent_ok;
      } else {
        worst_random = std::max(worst_random, m);
        ++random_ok;
      }
    } catch (const StencilOutsideDomain&) {
    } catch (const NotOnImage&) {
      ++not_on_image;
    }
  }
  r.details = {{"random_queries", random_ok},
               {"tangent_queries", tangent_ok},
               {"max_abs_random", worst_random},
               {"max_abs_tangent", worst_tangent},
               {"not_on_image", not_on_image}};
  if (random_ok == 0 && tangent_ok == 0) {
    r.value = std::numeric_limits<double>::quiet_NaN();
    r.expected = "no admissible query: D_x c(x, Y) is not a segment";
    r.passed = !ctx.c_linear();
    return;
  }
  le(r, std::max(worst_random, worst_tangent), 1e-4, "max |MTW|");
}

}  // namespace detail

/// Every named check. Each acceptance-level check belongs to one scenario.
inline const std::vector<CheckSpec>& check_catalog() {
  using detail::ge;
  using detail::le;
  static const std::vector<CheckSpec> catalog = {
      // ---------------------------------------------------------- diagnose
      {"a2", Stage::Diagnose, {}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto rep = check_a2(ctx.cost(), 32);
         ge(r, rep.value, rep.tolerance, "min |D2_xy c|");
         r.details = {{"samples", rep.samples}};
       }},
      {"a3_weak", Stage::Diagnose, {"bilinear", "shelf", "separable_quadratic"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto rep = check_a3(ctx.cost(), 100, false, ctx.config().seed);
         ge(r, rep.value, -rep.tolerance, "min MTW over tangent queries");
         const auto strict = check_a3(ctx.cost(), 10, true, ctx.config().seed);
         r.details = {{"samples", rep.samples}, {"skipped", rep.skipped}, {"strict_vacuous", strict.vacuous}};
       }},
      {"mtw", Stage::Diagnose, {"bilinear"}, detail::mtw_check},
      {"c_linearity", Stage::Diagnose, {}, [](ScenarioContext& ctx, CheckResult& r) {
         double worst = 0.0;
         for (const auto& x : detail::probe_points(ctx.cost().domain(), 5))
           worst = std::max(worst, c_linearity_defect(ctx.cost(), x, 32));
         if (ctx.c_linear()) {
           le(r, worst, 1e-6, "max tangent rotation (rad)");
         } else {
           ge(r, worst, 1e-3, "max tangent rotation (rad), cost is not c-linear");
         }
       }},
      {"c_linearity_foliated", Stage::Diagnose, {"bilinear"}, [](ScenarioContext& ctx, CheckResult& r) {
         const CostModel f = costs::foliated("exp((x1+2x2)y)", {1.0, 2.0}, costs::exp_product(),
                                             ctx.cost().domain(), ctx.cost().y_range());
         double worst = 0.0;
         for (const auto& x : detail::probe_points(f.domain(), 5)) worst = std::max(worst, c_linearity_defect(f, x, 32));
         le(r, worst, 1e-6, "max tangent rotation (rad) for b(x1 + 2 x2, y)");
       }},
      {"c_convexity", Stage::Diagnose, {}, [](ScenarioContext& ctx, CheckResult& r) {
         int convex = 0, total = 0;
         double worst = 0.0;
         for (const auto& x : detail::probe_points(ctx.cost().domain(), 4)) {
           const auto v = c_convexity_check(ctx.cost(), x);
           convex += v.convex;
           ++total;
           worst = std::max(worst, v.linearity_defect);
         }
         r.value = worst;
         r.details = {{"convex_points", convex}, {"points", total}};
         if (ctx.c_linear()) {
           r.expected = "D_x c(x, Y) is a segment at every probe point";
           r.passed = convex == total;
         } else {
           r.expected = "D_x c(x, Y) rejected (circular arc) at every probe point";
           r.passed = convex == 0;
         }
       }},
      {"p_set", Stage::Diagnose, {"bilinear", "quarter_disk_full", "quarter_disk_quarter"},
       [](ScenarioContext& ctx, CheckResult& r) {
         const Point2 xt = ctx.name() == "bilinear"            ? Point2{0.5, 0.5}
                           : ctx.name() == "quarter_disk_full" ? Point2{0.0, 0.0}
                                                               : Point2{0.0, 0.5};
         const auto m = p_set_membership(ctx.cost(), xt);
         le(r, m.worst_violation, 1e-6, "worst P-set violation");
         r.details = {{"x1", xt.x1}, {"x2", xt.x2}, {"pairs", m.pairs}};
       }},
      {"mcp", Stage::Diagnose, {"bilinear", "quarter_disk_full", "quarter_disk_quarter"},
       [](ScenarioContext& ctx, CheckResult& r) {
         const CostModel& c = ctx.cost();
         if (ctx.name() == "quarter_disk_full") {
           const auto m = mcp_check(c, ctx.mu(), ctx.nu(), {0.0, 0.0}, 0.3, 0.6);
           r.details = {{"band_mass", m.band_mass}, {"nu_mass", m.nu_mass}, {"slack", m.slack}};
           ge(r, m.band_mass - (m.nu_mass - m.slack), 0.0, "band mass - (nu mass - 2/N) at the origin on [0.3, 0.6]");
           return;
         }
         const Point2 xt = ctx.name() == "bilinear" ? Point2{0.5, 0.5} : Point2{0.0, 0.5};
         const Interval& Y = c.y_range();
         std::mt19937_64 rng(ctx.config().seed);
         std::uniform_real_distribution<double> start(Y.lo, Y.hi - 0.1 * Y.length());
         std::vector<std::pair<double, double>> intervals;
         for (int k = 0; k < 8; ++k) intervals.push_back({Y.lo + Y.length() * k / 8, Y.lo + Y.length() * (k + 1) / 8});
         for (int k = 0; k < 8; ++k) {
           const double a = start(rng);
           intervals.push_back({a, a + 0.1 * Y.length()});
         }
         double worst = -std::numeric_limits<double>::infinity();
         int holds = 0;
         for (auto [a, b] : intervals) {
           const auto m = mcp_check(c, ctx.mu(), ctx.nu(), xt, a, b);
           holds += m.holds;
           worst = std::max(worst, m.band_mass - (m.nu_mass - m.slack));
         }
         r.details = {{"x1", xt.x1}, {"x2", xt.x2}, {"intervals", intervals.size()}, {"holding", holds}};
         r.value = worst;
         r.tolerance = 0.0;
         r.expected = "band mass < nu mass - 2/N on every sampled subinterval";
         r.passed = holds == static_cast<int>(intervals.size());
       }},
      // ---------------------------------------------------------- quotient
      {"quotient_build", Stage::Quotient, {}, [](ScenarioContext& ctx, CheckResult& r) {
         if (!ctx.c_linear()) {
           r.expected = "NotCLinear";
           try {
             ctx.quotient();
             r.passed = false;
             r.error = "quotient built for a cost that is not c-linear";
           } catch (const NotCLinear& e) {
             r.passed = true;
             r.details = {{"reason", e.what()}};
           }
           return;
         }
         const auto& q = ctx.quotient();
         r.passed = true;
         r.expected = "quotient structure assembled";
         r.details = {{"y0", q.y0()},
                      {"z_lo", q.z_range().lo},
                      {"z_hi", q.z_range().hi},
                      {"K", q.min_jacobian()},
                      {"C", q.max_leaf_length()},
                      {"segments", q.segments().size()}};
       }},
      {"mass_consistency", Stage::Quotient, {"bilinear", "shelf", "separable_quadratic"},
       [](ScenarioContext& ctx, CheckResult& r) {
         le(r, std::abs(ctx.quotient().h_normalizer() - 1.0), 0.02, "|int_Z h_coarea - 1|");
       }},
      {"representative_independence", Stage::Quotient, {"bilinear", "shelf", "separable_quadratic"},
       [](ScenarioContext& ctx, CheckResult& r) {
         const auto& q = ctx.quotient();
         std::mt19937_64 rng(ctx.config().seed);
         const Interval Z = q.z_range();
         std::uniform_real_distribution<double> uz(Z.lo + 0.05 * Z.length(), Z.hi - 0.05 * Z.length());
         std::uniform_real_distribution<double> uy(ctx.cost().y_range().lo, ctx.cost().y_range().hi);
         double worst = 0.0;
         int tested = 0;
         for (int k = 0; k < 200 && tested < 10; ++k) {
           const double z = uz(rng), y = uy(rng);
           const auto reps = q.representatives(z);
           if (reps.size() < 2) continue;
           // Two representatives on different segments, as far apart as possible.
           std::size_t far = 1;
           for (std::size_t i = 1; i < reps.size(); ++i)
             if (distance(reps[i], reps[0]) > distance(reps[far], reps[0])) far = i;
           if (distance(reps[far], reps[0]) < 1e-3) continue;
           const CostModel& c = ctx.cost();
           const double b0 = c(reps[0], y) - c(reps[0], q.y0());
           const double b1 = c(reps[far], y) - c(reps[far], q.y0());
           worst = std::max(worst, std::abs(b0 - b1));
           ++tested;
         }
         r.details = {{"tested", tested}};
         le(r, worst, 1e-6, "max |b(z, y) difference| between representatives");
         r.passed = r.passed && tested == 10;
       }},
      {"shelf_density", Stage::Quotient, {"shelf"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& q = ctx.quotient();
         const double k = 1.0 / detail::shelf_area();
         double worst = 0.0;
         int compared = 0;
         for (std::size_t i = 0; i < q.z_nodes().size(); ++i) {
           const double z = q.z_nodes()[i];
           const double a = std::abs(z);
           if (a < 0.05 || a > 0.9) continue;
           const double ref = z < 0 ? 2 * k : k * (1.0 - domains::shelf_profile_inverse(z));
           worst = std::max(worst, std::abs(q.h_values()[i] - ref) / ref);
           ++compared;
         }
         const double jump = pushforward_density(q, ctx.mu(), -0.05, ctx.config().res.curve) -
                             pushforward_density(q, ctx.mu(), 0.05, ctx.config().res.curve);
         le(r, worst, 0.02, "max relative error of h");
         r.details = {{"k", k}, {"compared", compared}, {"jump", jump}, {"jump_over_k", jump / k}};
         r.passed = r.passed && jump >= 0.8 * k;
       }},
      {"lp_bound", Stage::Quotient, {"bilinear", "shelf"}, [](ScenarioContext& ctx, CheckResult& r) {
         bool ok = true;
         double worst = -std::numeric_limits<double>::infinity();
         r.details = nlohmann::json::array();
         for (double p : {1.0, 2.0, 4.0}) {
           const auto b = lp_bound_check(ctx.quotient(), ctx.mu(), p);
           ok = ok && b.pass;
           worst = std::max(worst, b.lhs / b.rhs);
           r.details.push_back({{"p", p}, {"lhs", b.lhs}, {"rhs", b.rhs}, {"C", b.C}, {"K", b.K}});
         }
         r.value = worst;
         r.tolerance = 1.05;
         r.expected = "int h^p <= (C/K)^(p-1) int f^p (1 + 5%) for p in {1, 2, 4}";
         r.passed = ok;
       }},
      {"factorization", Stage::Quotient, {"bilinear"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& q = ctx.quotient();
         const auto T = solve_1d(q, ctx.nu());
         const auto pts = detail::random_points(ctx.cost().domain(), 100, ctx.config().seed);
         const auto F = optimal_map_batch(ctx.splitting(), pts);
         double worst = 0.0;
         for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, std::abs(T(q.Q(pts[i])) - F[i].y));
         le(r, worst, 1e-2, "max |T(Q(x)) - F(x)|");
         r.details = {{"antitone", T.antitone()}, {"points", pts.size()}};
       }},
      {"holder", Stage::Quotient, {"bilinear"}, [](ScenarioContext&, CheckResult& r) {
         const double a = holder_exponent(1, std::numeric_limits<double>::infinity());
         const double b = holder_exponent(2, std::numeric_limits<double>::infinity());
         r.value = std::max(std::abs(a - 1.0), std::abs(b - 1.0 / 3.0));
         r.tolerance = 0.0;
         r.expected = "(n=1, beta=1) -> 1 and (n=2, beta=1) -> 1/3 exactly";
         r.passed = a == 1.0 && b == 1.0 / 3.0;
         r.details = {{"n1", a}, {"n2", b}};
       }},
      {"twist", Stage::Quotient, {"bilinear"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& q = ctx.quotient();
         const Interval Z = q.z_range();
         int monotone = 0, total = 0;
         for (int j = 0; j < 9; ++j) {
           const double y = ctx.cost().y_range().lo + ctx.cost().y_range().length() * (j + 0.5) / 9;
           bool up = true, down = true;
           double prev = q.reduced_cost_dy(Z.lo + 0.5 * Z.length() / 32, y);
           for (int i = 1; i < 32; ++i) {
             const double cur = q.reduced_cost_dy(Z.lo + (i + 0.5) * Z.length() / 32, y);
             up = up && cur > prev;
             down = down && cur < prev;
             prev = cur;
           }
           monotone += up || down;
           ++total;
         }
         r.value = monotone;
         r.expected = "z -> D_y b(z, y) strictly monotone for every sampled y";
         r.passed = monotone == total;
       }},
      // ---------------------------------------------------------- split
      {"map_vs_arctan", Stage::Split, {"quarter_disk_full"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto t0 = std::chrono::steady_clock::now();
         const auto& mf = ctx.map();
         double worst = 0.0;
         int n = 0;
         for (std::size_t k = 0; k < mf.points.size(); ++k) {
           const Point2 x = mf.points[k];
           if (std::hypot(x.x1, x.x2) < 0.1) continue;
           worst = std::max(worst, std::abs(mf.values[k].y - std::atan2(x.x2, x.x1)));
           ++n;
         }
         le(r, worst, 0.02, "max |F(x) - arctan(x2/x1)| (rad)");
         r.details = {{"points", n},
                      {"map_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
       }},
      {"discontinuity_gap", Stage::Split, {"quarter_disk_full"}, [](ScenarioContext& ctx, CheckResult& r) {
         const std::vector<Point2> pts{{1e-3, 0.05}, {0.05, 1e-3}};
         const auto v = optimal_map_batch(ctx.splitting(), pts);
         ge(r, v[0].y - v[1].y, 1.4, "F(1e-3, 0.05) - F(0.05, 1e-3) (rad)");
         r.details = {{"F_a", v[0].y}, {"F_b", v[1].y}};
       }},
      {"split_level", Stage::Split, {"quarter_disk_full", "bilinear"}, [](ScenarioContext& ctx, CheckResult& r) {
         const bool qd = ctx.name() == "quarter_disk_full";
         const double y = qd ? kPi / 4 : 0.5;
         const auto s = split_level(ctx.splitting(), y, ctx.config().res.curve);
         if (!s.curve) {
           r.error = "no split-level curve traced";
           return;
         }
         double worst = 0.0;
         for (const auto& v : s.curve->vertices())
           worst = std::max(worst, qd ? std::abs(v.x1 - v.x2) / std::sqrt(2.0) : std::abs(v.x2 - 0.5));
         le(r, worst, 1e-2, qd ? "distance of the split curve to the diagonal" : "distance of the split curve to x2 = 0.5");
         r.details = {{"lambda", s.lambda}, {"mass_error", s.mass_error}};
         ctx.level_curves().push_back(*s.curve);
       }},
      {"pushforward_ks", Stage::Split, {}, [](ScenarioContext& ctx, CheckResult& r) {
         le(r, verify_pushforward(ctx.splitting(), ctx.ks_map()), 0.02, "KS(F#mu, nu)");
       }},
      {"bracketing", Stage::Split, {}, [](ScenarioContext& ctx, CheckResult& r) {
         const double eps = ctx.splitting().mass_tolerance();
         double worst = -std::numeric_limits<double>::infinity();
         for (const auto& v : ctx.ks_map().values) worst = std::max({worst, -v.f_at_a, v.f_at_b});
         le(r, worst, eps, "max(-f_x(a), f_x(b))");
       }},
      {"splitting_consistency", Stage::Split, {}, [](ScenarioContext& ctx, CheckResult& r) {
         double worst = 0.0;
         for (const auto& v : ctx.ks_map().values)
           if (v.flags == kMapOk) worst = std::max(worst, v.residual);
         le(r, worst, ctx.splitting().mass_tolerance(), "max |f_x(F(x))| at unflagged points");
         r.details = {{"flagged", ctx.ks_map().flagged()}, {"points", ctx.ks_map().points.size()}};
       }},
      {"uniqueness", Stage::Split, {"bilinear", "quarter_disk_quarter"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& mf = ctx.ks_map();
         const auto single =
             std::count_if(mf.values.begin(), mf.values.end(), [](const MapValue& v) { return v.sign_changes == 1; });
         ge(r, static_cast<double>(single) / mf.values.size(), 0.99, "fraction with one sign change");
       }},
      {"support_monotonicity", Stage::Split, {}, [](ScenarioContext& ctx, CheckResult& r) {
         le(r, support_monotonicity_failure_rate(ctx.splitting(), ctx.ks_map(), 10000, ctx.config().seed), 0.01,
            "fraction of pairs violating monotone support");
       }},
      {"map_vs_identity", Stage::Split, {"separable_quadratic"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& mf = ctx.map();
         double worst = 0.0;
         for (std::size_t k = 0; k < mf.points.size(); ++k) worst = std::max(worst, std::abs(mf.values[k].y - mf.points[k].x1));
         le(r, worst, 1e-2, "max |F(x) - x1|");
       }},
      {"continuity_modulus", Stage::Split, {"bilinear"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto& mf = ctx.map();
         le(r, mf.modulus, 3.0 * ctx.cost().y_range().length() / mf.grid_n, "max adjacent |F(x) - F(x')|");
       }},
      // ---------------------------------------------------------- oracle
      {"lp_certificates", Stage::Oracle, {}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto cert = certify(ctx.plan(), ctx.discrete());
         le(r, std::max(cert.dual_feasibility, cert.complementary_slackness), 1e-7,
            "max(dual infeasibility, complementary slackness)");
         r.details = {{"dual_feasibility", cert.dual_feasibility},
                      {"complementary_slackness", cert.complementary_slackness},
                      {"marginal_error", cert.marginal_error},
                      {"basic_cells", cert.basic_cells},
                      {"basis_limit", cert.basis_limit},
                      {"objective", ctx.plan().objective},
                      {"iterations", ctx.plan().iterations},
                      {"degenerate_pivots", ctx.plan().degenerate_pivots},
                      {"perturbed", ctx.plan().perturbed},
                      {"sources", ctx.discrete().sources()},
                      {"targets", ctx.discrete().targets()}};
         r.passed = r.passed && cert.marginal_error <= 1e-9 && cert.basic_cells <= cert.basis_limit;
       }},
      {"c_monotone", Stage::Oracle, {}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto m = c_monotonicity_check(ctx.plan(), ctx.discrete(), 10000, ctx.config().seed);
         le(r, m.worst_violation, 1e-9, "worst sampled c-monotonicity violation");
         r.details = {{"pairs", m.pairs}};
       }},
      {"potential_indifference", Stage::Oracle, {"bilinear", "quarter_disk_full"}, [](ScenarioContext& ctx, CheckResult& r) {
         const Point2 x = ctx.cost().domain().bounds.center();
         const Point2 anchor = ctx.cost().domain().contains(x) ? x : Point2{0.5, 0.5};
         const auto curve = trace_level_curve(ctx.cost(), anchor, ctx.cost().y_range().mid(), ctx.config().res.curve);
         const auto res = potential_indifference_check(ctx.plan(), ctx.discrete(), ctx.cost(), curve);
         r.details = {{"skipped", res.skipped}, {"reason", res.reason}, {"atoms", res.atoms}};
         if (!ctx.c_linear()) {
           r.expected = "skipped with NotCLinear";
           r.passed = res.skipped;
           return;
         }
         le(r, res.deviation, 1e-2, "spread of u_i - c(x_i, y) along a leaf");
         ctx.level_curves().push_back(curve);
       }},
      {"barycentric_spread", Stage::Oracle, {"quarter_disk_full"}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto bm = barycentric_map(ctx.plan(), ctx.discrete());
         const double spacing = ctx.nu().range().length() / ctx.config().res.oracle_ny;
         const auto good =
             std::count_if(bm.spread.begin(), bm.spread.end(), [&](double s) { return s <= 2 * spacing + 1e-12; });
         ge(r, static_cast<double>(good) / bm.spread.size(), 0.95, "fraction of atoms with spread <= 2 spacings");
       }},
      // ---------------------------------------------------------- compare
      {"oracle_agreement", Stage::Compare, {}, [](ScenarioContext& ctx, CheckResult& r) {
         const auto bm = barycentric_map(ctx.plan(), ctx.discrete());
         const auto& F = ctx.map_at_atoms();
         const auto& w = ctx.discrete().source_weights();
         double l1 = 0.0;
         for (std::size_t i = 0; i < F.size(); ++i) l1 += w[i] * std::abs(bm.y_hat[i] - F[i].y);
         le(r, l1, ctx.name() == "separable_quadratic" ? 0.02 : 0.05, "mu-weighted L1(barycentric map, F)");
       }},
  };
  return catalog;
}

inline std::vector<const CheckSpec*> checks_for(const std::string& scenario, const std::vector<Stage>& stages) {
  std::vector<const CheckSpec*> out;
  for (Stage s : stages)
    for (const auto& spec : check_catalog())
      if (spec.stage == s && (spec.scenarios.empty() || spec.scenarios.count(scenario))) out.push_back(&spec);
  return out;
}

/// Runs the checks of the given stages (restricted to config.checks if set)
/// in dependency order. Module errors are recorded as failed checks.
inline RunReport run(ScenarioContext& ctx, const std::vector<Stage>& stages, const std::string& command = "all") {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.scenario = ctx.name();
  rep.command = command;
  const auto& wanted = ctx.config().checks;
  const auto available = checks_for(ctx.name(), {Stage::Diagnose, Stage::Quotient, Stage::Split, Stage::Oracle, Stage::Compare});
  for (const auto& w : wanted) {
    const bool known = std::any_of(available.begin(), available.end(), [&](const CheckSpec* s) { return s->name == w; });
    if (!known) throw ConfigError("check '" + w + "' is not defined for scenario '" + ctx.name() + "'");
  }
  for (const CheckSpec* spec : checks_for(ctx.name(), stages)) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), spec->name) == wanted.end()) continue;
    CheckResult r;
    r.name = spec->name;
    r.stage = stage_name(spec->stage);
    const auto c0 = std::chrono::steady_clock::now();
    try {
      spec->run(ctx, r);
    } catch (const std::exception& e) {
      r.passed = false;
      r.error = e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - c0).count();
    rep.checks.push_back(std::move(r));
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

/// Writes <out>/<scenario>/report.json and, unless json_only, the CSV
/// artifacts for whatever the run computed.
inline std::filesystem::path write_artifacts(ScenarioContext& ctx, const RunReport& rep) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(ctx.config().out) / ctx.name();
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "report.json");
    os << to_json(rep, ctx.config()).dump(2) << '\n';
  }
  if (ctx.config().json_only) return dir;
  if (ctx.has_map()) {
    std::ofstream os(dir / "map.csv");
    write_map_csv(os, ctx.map());
  }
  if (ctx.has_quotient()) {
    std::ofstream os(dir / "density.csv");
    write_density_csv(os, ctx.quotient());
  }
  if (ctx.has_plan()) {
    std::ofstream p(dir / "plan.csv");
    write_plan_csv(p, ctx.plan());
    std::ofstream d(dir / "duals.csv");
    write_duals_csv(d, ctx.plan(), ctx.discrete());
  }
  if (!ctx.level_curves().empty()) {
    std::ofstream os(dir / "levelcurves.csv");
    write_level_curves_csv(os, ctx.level_curves());
  }
  return dir;
}

}  // namespace splitot
