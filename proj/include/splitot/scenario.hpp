// Named experiment configurations: cost, domain, marginals and resolutions.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "splitot/cost_model.hpp"
#include "splitot/measures.hpp"

namespace splitot {

struct Resolutions {
  int grid_n = 400;     // source quadrature N x N
  int nu_m = 2048;      // target cumulative table
  int curve = 512;      // level-curve tracing grid
  int y_scan = 256;     // splitting scan
  int oracle_nx = 30;   // oracle source atoms per axis
  int oracle_ny = 60;   // oracle target atoms
  int map_grid = 30;    // map field for the arctan and continuity checks
  int ks_grid = 60;     // map field for the pushforward check
};

struct ScenarioConfig {
  std::string scenario = "bilinear";
  // Empty / NaN fields are filled from the built-in scenario of that name.
  std::string cost;
  std::string domain;
  double y_lo = std::numeric_limits<double>::quiet_NaN();
  double y_hi = std::numeric_limits<double>::quiet_NaN();
  std::string source_density;  // "uniform" or "gaussian"
  double source_param = 1.0;   // gaussian width
  std::string target_density;  // "uniform" or "ramp"
  double target_param = 0.0;   // ramp slope: g(y) = 1 + slope (t - 1/2), t = (y - a)/(b - a)
  Resolutions res;
  std::string out = "out";
  std::vector<std::string> checks;  // empty: every check of the selected stages
  std::uint64_t seed = 7;
  bool json_only = false;
};

struct ScenarioDefaults {
  std::string cost, domain;
  double y_lo, y_hi;
  std::string description;
};

inline const std::map<std::string, ScenarioDefaults>& builtin_scenarios() {
  static const std::map<std::string, ScenarioDefaults> table = {
      {"bilinear", {"bilinear", "unit_square", 0.0, 1.0, "c = x2 y on the unit square, uniform marginals"}},
      {"shelf", {"bilinear", "shelf", 0.0, 1.0, "c = x2 y on {x2 <= phi(x1)} with phi(t) = exp(1 - 1/t^2)"}},
      {"quarter_disk_full",
       {"quarter_disk", "quarter_disk", 0.0, kPi / 2, "c = -x . (cos y, sin y), nu uniform on (0, pi/2)"}},
      {"quarter_disk_quarter",
       {"quarter_disk", "quarter_disk", 0.0, kPi / 4, "c = -x . (cos y, sin y), nu uniform on (0, pi/4)"}},
      {"separable_quadratic",
       {"separable_quadratic", "unit_square", 0.0, 1.0, "c = (x1 - y)^2 on the unit square, uniform marginals"}},
  };
  return table;
}

inline Domain make_domain(const std::string& name) {
  if (name == "unit_square") return domains::unit_square();
  if (name == "quarter_disk") return domains::quarter_disk();
  if (name == "shelf") return domains::shelf();
  throw ConfigError("unknown domain '" + name + "'");
}

/// Fills defaults from the named scenario and validates names and resolutions.
inline ScenarioConfig resolve(ScenarioConfig cfg) {
  const auto& table = builtin_scenarios();
  auto it = table.find(cfg.scenario);
  if (it == table.end()) throw ConfigError("unknown scenario '" + cfg.scenario + "'");
  const ScenarioDefaults& d = it->second;
  if (cfg.cost.empty()) cfg.cost = d.cost;
  if (cfg.domain.empty()) cfg.domain = d.domain;
  if (std::isnan(cfg.y_lo)) cfg.y_lo = d.y_lo;
  if (std::isnan(cfg.y_hi)) cfg.y_hi = d.y_hi;
  if (cfg.source_density.empty()) cfg.source_density = "uniform";
  if (cfg.target_density.empty()) cfg.target_density = "uniform";
  if (!CostRegistry::builtin().contains(cfg.cost)) throw ConfigError("unknown cost '" + cfg.cost + "'");
  make_domain(cfg.domain);
  if (!(cfg.y_hi > cfg.y_lo)) throw ConfigError("target interval must satisfy y_lo < y_hi");
  if (cfg.source_density != "uniform" && cfg.source_density != "gaussian")
    throw ConfigError("unknown source density '" + cfg.source_density + "'");
  if (cfg.target_density != "uniform" && cfg.target_density != "ramp")
    throw ConfigError("unknown target density '" + cfg.target_density + "'");
  if (cfg.target_density == "ramp" && std::abs(cfg.target_param) >= 2.0)
    throw ConfigError("ramp slope must lie in (-2, 2)");
  if (cfg.source_density == "gaussian" && !(cfg.source_param > 0.0))
    throw ConfigError("gaussian width must be positive");
  const Resolutions& r = cfg.res;
  auto need = [](int v, int lo, const char* what) {
    if (v < lo) throw ConfigError(std::string(what) + " must be >= " + std::to_string(lo));
  };
  need(r.grid_n, 10, "grid_n");
  need(r.nu_m, 16, "nu_m");
  need(r.curve, 16, "curve resolution");
  need(r.y_scan, 8, "y_scan");
  need(r.oracle_nx, 2, "oracle_nx");
  need(r.oracle_ny, 2, "oracle_ny");
  need(r.map_grid, 2, "map_grid");
  need(r.ks_grid, 2, "ks_grid");
  return cfg;
}

struct Scenario {
  ScenarioConfig config;  // resolved
  CostModel cost;
  SourceMeasure mu;
  TargetMeasure nu;
};

inline Scenario make_scenario(const ScenarioConfig& raw) {
  const ScenarioConfig cfg = resolve(raw);
  const Interval Y{cfg.y_lo, cfg.y_hi};
  Domain dom = make_domain(cfg.domain);
  CostModel cost = CostRegistry::builtin().make(cfg.cost, dom, Y);
  std::function<double(Point2)> f = [](Point2) { return 1.0; };
  if (cfg.source_density == "gaussian") {
    const Point2 c = dom.bounds.center();
    const double s = cfg.source_param;
    f = [c, s](Point2 x) {
      const Vec2 d = x - c;
      return std::exp(-dot(d, d) / (2 * s * s));
    };
  }
  std::function<double(double)> g = [](double) { return 1.0; };
  if (cfg.target_density == "ramp") {
    const double slope = cfg.target_param;
    g = [Y, slope](double y) { return 1.0 + slope * ((y - Y.lo) / Y.length() - 0.5); };
  }
  SourceMeasure mu(dom, f, cfg.res.grid_n);
  TargetMeasure nu(Y, g, cfg.res.nu_m);
  return Scenario{cfg, std::move(cost), std::move(mu), std::move(nu)};
}

}  // namespace splitot
