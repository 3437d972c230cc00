// Command-line front end: config file + flag overrides, scenario execution and
// exit codes (0 all pass, 1 check failure, 2 config or runtime error).
#pragma once

#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "CLI11.hpp"
#include "splitot/runner.hpp"

namespace splitot::cli {

inline constexpr int kExitPass = 0;
inline constexpr int kExitCheckFailure = 1;
inline constexpr int kExitError = 2;

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

/// Reads an INI file with optional sections [scenario], [resolutions] and
/// [run] into a config.
inline ScenarioConfig load_config(const std::string& path, ScenarioConfig cfg = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("cannot read config: " + std::string(e.what()));
  }
  static const std::set<std::string> known = {
      "scenario.name",        "scenario.cost",           "scenario.domain",      "scenario.y_lo",
      "scenario.y_hi",        "scenario.source_density", "scenario.source_param", "scenario.target_density",
      "scenario.target_param", "resolutions.grid_n",     "resolutions.nu_m",     "resolutions.curve",
      "resolutions.y_scan",   "resolutions.oracle_nx",   "resolutions.oracle_ny", "resolutions.map_grid",
      "resolutions.ks_grid",  "run.out",                 "run.checks",           "run.seed",
      "run.json_only"};
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live in a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (!known.count(full)) throw ConfigError("unknown config key '" + full + "'");
    }
  }
  try {
    cfg.scenario = tree.get("scenario.name", cfg.scenario);
    cfg.cost = tree.get("scenario.cost", cfg.cost);
    cfg.domain = tree.get("scenario.domain", cfg.domain);
    cfg.y_lo = tree.get("scenario.y_lo", cfg.y_lo);
    cfg.y_hi = tree.get("scenario.y_hi", cfg.y_hi);
    cfg.source_density = tree.get("scenario.source_density", cfg.source_density);
    cfg.source_param = tree.get("scenario.source_param", cfg.source_param);
    cfg.target_density = tree.get("scenario.target_density", cfg.target_density);
    cfg.target_param = tree.get("scenario.target_param", cfg.target_param);
    Resolutions& r = cfg.res;
    r.grid_n = tree.get("resolutions.grid_n", r.grid_n);
    r.nu_m = tree.get("resolutions.nu_m", r.nu_m);
    r.curve = tree.get("resolutions.curve", r.curve);
    r.y_scan = tree.get("resolutions.y_scan", r.y_scan);
    r.oracle_nx = tree.get("resolutions.oracle_nx", r.oracle_nx);
    r.oracle_ny = tree.get("resolutions.oracle_ny", r.oracle_ny);
    r.map_grid = tree.get("resolutions.map_grid", r.map_grid);
    r.ks_grid = tree.get("resolutions.ks_grid", r.ks_grid);
    cfg.out = tree.get("run.out", cfg.out);
    if (auto c = tree.get_optional<std::string>("run.checks")) cfg.checks = split_list(*c);
    cfg.seed = tree.get("run.seed", cfg.seed);
    cfg.json_only = tree.get("run.json_only", cfg.json_only);
  } catch (const boost::property_tree::ptree_bad_data& e) {
    throw ConfigError("bad config value: " + std::string(e.what()));
  }
  return cfg;
}

inline void print_report(std::ostream& out, const RunReport& rep) {
  for (const auto& c : rep.checks) {
    out << (c.passed ? "[PASS] " : "[FAIL] ") << rep.scenario << '/' << c.name;
    if (std::isfinite(c.value)) out << "  value=" << std::setprecision(6) << c.value;
    if (!c.expected.empty()) out << "  (" << c.expected << ')';
    if (!c.error.empty()) out << "  error: " << c.error;
    out << '\n';
  }
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Mass-splitting optimal transport toolkit: diagnostics, quotient reduction, splitting map and LP oracle"};
  app.require_subcommand(1);

  std::string config_path, scenario, outdir, checks;
  int grid_n = 0, oracle_nx = 0, oracle_ny = 0;
  std::uint64_t seed = 0;
  bool json_only = false, list = false;

  static const std::pair<const char*, const char*> commands[] = {
      {"diagnose", "cost and geometry diagnostics"},
      {"quotient", "quotient reduction checks"},
      {"split", "splitting map checks"},
      {"oracle", "discrete LP oracle checks"},
      {"compare", "oracle versus splitting map"},
      {"all", "every check of the scenario"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI file with [scenario], [resolutions] and [run] sections");
    sub->add_option("--scenario", scenario, "built-in scenario name, or 'all'");
    sub->add_option("--out", outdir, "output directory");
    sub->add_option("--grid-n", grid_n, "source quadrature resolution N");
    sub->add_option("--oracle-nx", oracle_nx, "oracle source atoms per axis");
    sub->add_option("--oracle-ny", oracle_ny, "oracle target atoms");
    sub->add_option("--checks", checks, "comma-separated check names");
    sub->add_option("--seed", seed, "random seed");
    sub->add_flag("--json-only", json_only, "write report.json only");
    sub->add_flag("--list", list, "list the checks this command would run and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ScenarioConfig base;
    if (!config_path.empty()) base = load_config(config_path, base);
    if (!scenario.empty()) base.scenario = scenario;
    if (!outdir.empty()) base.out = outdir;
    if (grid_n) base.res.grid_n = grid_n;
    if (oracle_nx) base.res.oracle_nx = oracle_nx;
    if (oracle_ny) base.res.oracle_ny = oracle_ny;
    if (!checks.empty()) base.checks = split_list(checks);
    if (app.get_subcommands().front()->count("--seed")) base.seed = seed;
    if (json_only) base.json_only = true;

    std::vector<std::string> names;
    if (base.scenario == "all") {
      for (const auto& [n, d] : builtin_scenarios()) names.push_back(n);
    } else {
      names.push_back(base.scenario);
    }
    const auto stages = stages_for(command);

    bool all_pass = true;
    for (const auto& n : names) {
      ScenarioConfig cfg = base;
      cfg.scenario = n;
      if (base.scenario == "all") {
        // Check names are scenario specific; keep only those defined here.
        std::vector<std::string> keep;
        const auto avail = checks_for(n, stages);
        for (const auto& c : base.checks)
          if (std::any_of(avail.begin(), avail.end(), [&](const CheckSpec* s) { return s->name == c; })) keep.push_back(c);
        if (!base.checks.empty() && keep.empty()) continue;
        cfg.checks = keep;
      }
      if (list) {
        cfg = resolve(cfg);
        for (const CheckSpec* s : checks_for(n, stages))
          if (cfg.checks.empty() || std::find(cfg.checks.begin(), cfg.checks.end(), s->name) != cfg.checks.end())
            out << n << '/' << s->name << " (" << stage_name(s->stage) << ")\n";
        continue;
      }
      ScenarioContext ctx(make_scenario(cfg));
      const RunReport rep = run(ctx, stages, command);
      const auto dir = write_artifacts(ctx, rep);
      print_report(out, rep);
      out << (rep.all_passed() ? "ok   " : "FAIL ") << n << ": " << rep.checks.size() << " checks, "
          << std::fixed << std::setprecision(2) << rep.seconds << " s, artifacts in " << dir.string() << '\n';
      out.unsetf(std::ios::floatfield);
      all_pass = all_pass && rep.all_passed();
    }
    return all_pass ? kExitPass : kExitCheckFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace splitot::cli
