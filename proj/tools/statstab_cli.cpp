// statstab: batch experiments on expanding interval maps and Lorenz-like flows.
//
// Exit codes: 0 ok, 2 convergence failure, 3 inequality violation,
// 4 infeasible parameters.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "statstab/bv_norms.hpp"
#include "statstab/errors.hpp"
#include "statstab/flow_lab.hpp"
#include "statstab/io.hpp"
#include "statstab/map_core.hpp"
#include "statstab/stability.hpp"
#include "statstab/transfer.hpp"

namespace {

using nlohmann::json;
using namespace statstab;

constexpr int kExitOk = 0;
constexpr int kExitConvergence = 2;
constexpr int kExitInequality = 3;
constexpr int kExitInfeasible = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 17;
  int threads = 1;
  bool verbose = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "RNG seed");
  cmd->add_option("--threads", args.threads, "worker threads");
  cmd->add_flag("--verbose", args.verbose, "chatty progress on stderr");
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  std::filesystem::create_directories(args.out_dir);
  return (std::filesystem::path(args.out_dir) / name).string();
}

// Fully resolved config (defaults filled) so a run can be reproduced from its
// output directory alone.
void echo_config(const CommonArgs& args, const std::string& experiment, const json& resolved) {
  json echo = {{"experiment", experiment},
               {"seed", args.seed},
               {"threads", args.threads},
               {"config", resolved}};
  write_file(out_path(args, "resolved_config.json"), echo.dump(2) + "\n");
}

void log(const CommonArgs& args, const std::string& msg) {
  if (args.verbose) std::cerr << "[statstab] " << msg << "\n";
}

GridFunction random_grid_function(double a, double b, std::size_t n_cells, std::mt19937_64& rng) {
  constexpr double pi = 3.14159265358979323846;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<double> amp(6), phase(6);
  for (int m = 0; m < 6; ++m) {
    amp[m] = unif(rng);
    phase[m] = pi * unif(rng);
  }
  return GridFunction::sample(a, b, n_cells, [&](double x) {
    double s = 0.0;
    const double t = (x - a) / (b - a);
    for (int m = 0; m < 6; ++m) s += amp[m] * std::sin(2.0 * pi * (m + 1) * t + phase[m]);
    return s;
  });
}

// --- density ----------------------------------------------------------------

int run_density(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const auto map = map_from_json(cfg.at("map"));
  const auto n_cells = cfg.value("n_cells", std::size_t{4096});
  const double tol = cfg.value("residual_tol", 1e-10);
  json resolved = {{"map", map_descriptor(map)}, {"n_cells", n_cells}, {"residual_tol", tol}};
  echo_config(args, "density", resolved);
  GridFunction h = GridFunction::constant(map.a(), map.b(), 2, 0.0);
  try {
    h = invariant_density(map, n_cells, tol);
  } catch (const NoConvergence& e) {
    write_file(out_path(args, "density_summary.json"),
               json{{"status", "no_convergence"}, {"error", e.what()}}.dump(2) + "\n");
    std::cerr << "density: " << e.what() << "\n";
    return kExitConvergence;
  }
  CsvTable csv;
  csv.header = {"x_mid", "density"};
  std::string plot;
  for (std::size_t i = 0; i < h.n_cells(); ++i) {
    csv.add_row({h.midpoint(i), h[i]});
    plot += fmt17(h.midpoint(i)) + " " + fmt17(h[i]) + "\n";
  }
  write_file(out_path(args, "density.csv"), csv.to_string());
  write_file(out_path(args, "density.dat"), plot);
  const GridFunction push = apply_transfer(map, h);
  json summary = {{"status", "ok"},
                  {"n_cells", n_cells},
                  {"mass", h.integral()},
                  {"fixed_point_residual_l1", l1_distance(push, h)},
                  {"residual_tol", tol}};
  write_file(out_path(args, "density_summary.json"), summary.dump(2) + "\n");
  log(args, "density written, residual " + fmt17(l1_distance(push, h)));
  return kExitOk;
}

// --- ly-check ----------------------------------------------------------------

int run_ly_check(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const auto map = map_from_json(cfg.at("map"));
  const double alpha = cfg.value("alpha", map.alpha());
  const double eps0 = cfg.value("eps0", 0.05 * map.length());
  const int k = cfg.value("k", 1);
  const int n_max = cfg.value("n_max", 10);
  const int n_random_g = cfg.value("n_random_g", 20);
  const auto n_cells = cfg.value("n_cells", std::size_t{1024});
  json resolved = {{"map", map_descriptor(map)}, {"alpha", alpha},      {"eps0", eps0},
                   {"k", k},                     {"n_max", n_max},      {"n_random_g", n_random_g},
                   {"n_cells", n_cells}};
  echo_config(args, "ly-check", resolved);
  LYConstants ly;
  try {
    ly = ly_constants(map, alpha, eps0, k);
  } catch (const NoContractingK& e) {
    write_file(out_path(args, "ly_constants.json"),
               json{{"status", "no_contracting_k"}, {"error", e.what()}}.dump(2) + "\n");
    std::cerr << "ly-check: " << e.what() << "\n";
    return kExitInfeasible;
  }
  write_file(out_path(args, "ly_constants.json"), to_json(ly).dump(2) + "\n");
  std::mt19937_64 rng(args.seed);
  CsvTable csv;
  csv.header = {"g_index", "n", "lhs", "rhs", "holds"};
  bool all_hold = true;
  std::string plot;
  for (int gi = 0; gi < n_random_g; ++gi) {
    const GridFunction g = random_grid_function(map.a(), map.b(), n_cells, rng);
    const LYReport rep = verify_ly(map, ly, g, n_max);
    all_hold = all_hold && rep.all_hold;
    for (const auto& row : rep.rows) {
      csv.add_row({static_cast<double>(gi), static_cast<double>(row.n), row.lhs, row.rhs,
                   row.holds ? 1.0 : 0.0});
      if (gi == 0) plot += fmt17(row.n) + " " + fmt17(row.lhs / std::max(row.rhs, 1e-300)) + "\n";
    }
    log(args, "g " + std::to_string(gi) + (rep.all_hold ? " holds" : " VIOLATION"));
  }
  write_file(out_path(args, "ly_verification.csv"), csv.to_string());
  write_file(out_path(args, "ly_ratio.dat"), plot);
  if (!all_hold) {
    std::cerr << "ly-check: inequality violated in at least one row\n";
    return kExitInequality;
  }
  return kExitOk;
}

// --- op-distance --------------------------------------------------------------

int run_op_distance(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const std::string family = cfg.value("family", "perturbed_doubling");
  const double base_param = cfg.value("base_param", 0.75);
  const auto eps_list = cfg.at("eps_list").get<std::vector<double>>();
  const auto n_cells = cfg.value("n_cells", std::size_t{4096});
  json resolved = {{"family", family},
                   {"base_param", base_param},
                   {"eps_list", eps_list},
                   {"n_cells", n_cells}};
  echo_config(args, "op-distance", resolved);
  CsvTable csv;
  csv.header = {"eps", "map_distance_bound", "op_distance_lower", "op_distance_upper",
                "density_gap_l1"};
  std::string plot;
  json rows = json::array();
  bool any_violation = false;
  for (double eps : eps_list) {
    const auto pair = statstab::detail::make_family_pair(family, base_param, eps);
    const double d_hat =
        eps == 0.0 ? 0.0 : map_distance_upper(pair.f0, pair.f_eps, pair.sigma, pair.A);
    const BVParams params = BVParams::defaults(pair.f0.a(), pair.f0.b(), n_cells, pair.f0.alpha());
    auto est = operator_distance(pair.f0, pair.f_eps,
                                 build_dictionary(pair.f0.a(), pair.f0.b(), n_cells), d_hat,
                                 params);
    est.density_gap = density_stability(pair.f0, pair.f_eps, n_cells);
    any_violation = any_violation || !est.lower_le_upper;
    csv.add_row({eps, d_hat, est.op_distance_lower, est.op_distance_upper, est.density_gap});
    plot += fmt17(eps) + " " + fmt17(est.op_distance_lower) + "\n";
    json j = to_json(est);
    j["map_distance_bound"] = d_hat;
    rows.push_back(j);
    log(args, "eps " + fmt17(eps) + " lower " + fmt17(est.op_distance_lower) + " upper " +
                  fmt17(est.op_distance_upper));
  }
  write_file(out_path(args, "op_distance.csv"), csv.to_string());
  write_file(out_path(args, "op_distance.dat"), plot);
  write_file(out_path(args, "op_distance.json"), json{{"rows", rows}}.dump(2) + "\n");
  if (any_violation) {
    std::cerr << "op-distance: measured lower estimate exceeded the certified upper bound\n";
    return kExitInequality;
  }
  return kExitOk;
}

// --- flow-sim -----------------------------------------------------------------

int run_flow_sim(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const FlowSystem sys = flow_from_json(cfg.at("flow"));
  const CrossSection section = section_from_json(cfg.value("section", json::object()));
  const auto n_orbits = cfg.value("n_orbits", std::size_t{64});
  const double horizon = cfg.value("horizon", 100.0);
  const double warmup = cfg.value("warmup", 20.0);
  json resolved = {{"flow", cfg.at("flow")},
                   {"section", cfg.value("section", json::object())},
                   {"n_orbits", n_orbits},
                   {"horizon", horizon},
                   {"warmup", warmup}};
  echo_config(args, "flow-sim", resolved);

  json eigen_report = json::array();
  for (const auto& s : sys.singularities()) {
    const auto chk = lorenz_like_check(sys, s);
    eigen_report.push_back({{"point", {s[0], s[1], s[2]}},
                            {"eigenvalues", chk.eigenvalues},
                            {"is_lorenz_like", chk.is_lorenz_like}});
  }
  write_file(out_path(args, "singularities.json"), eigen_report.dump(2) + "\n");

  std::mt19937_64 rng(args.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  CsvTable csv;
  csv.header = {"u_start", "v_start", "tau", "u_hit", "v_hit"};
  std::string plot;
  std::size_t failures = 0;
  std::vector<ReturnRecord> records;
  for (std::size_t i = 0; i < n_orbits; ++i) {
    // seed orbits from warmed-up states near the attractor
    const State3 raw{-10.0 + 20.0 * unif(rng), -10.0 + 20.0 * unif(rng), 15.0 + 20.0 * unif(rng)};
    try {
      const State3 x = integrate(sys, raw, warmup).endpoint();
      // march the orbit to the section by asking for the first return from its
      // current projection
      auto [u0, v0] = section.to_uv(x);
      if (!section.in_bounds(u0, v0)) {
        ++failures;
        continue;
      }
      // start slightly off-plane: the return machinery needs to leave first
      const ReturnRecord rec = poincare_return(sys, section, u0, v0, 0.0, horizon);
      records.push_back(rec);
      csv.add_row({rec.u_start, rec.v_start, rec.tau, rec.u_hit, rec.v_hit});
      plot += fmt17(rec.u_start) + " " + fmt17(rec.u_hit) + "\n";
    } catch (const std::exception& e) {
      ++failures;
      log(args, "orbit " + std::to_string(i) + " failed: " + e.what());
    }
  }
  write_file(out_path(args, "returns.csv"), csv.to_string());
  write_file(out_path(args, "returns.dat"), plot);
  json summary = {{"n_orbits", n_orbits},
                  {"n_returns", records.size()},
                  {"n_failures", failures},
                  {"failure_rate", static_cast<double>(failures) / static_cast<double>(n_orbits)}};
  write_file(out_path(args, "flow_sim_summary.json"), summary.dump(2) + "\n");
  if (records.empty()) {
    std::cerr << "flow-sim: all sample orbits failed to return\n";
    return kExitConvergence;
  }
  return kExitOk;
}

// --- passage-check --------------------------------------------------------------

int run_passage_check(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const FlowSystem sys = flow_from_json(cfg.at("flow"));
  const auto x_list = cfg.value("x_list", std::vector<double>{0.5, 0.1, 0.01, 1e-4});
  json resolved = {{"flow", cfg.at("flow")}, {"x_list", x_list}};
  echo_config(args, "passage-check", resolved);
  CsvTable csv;
  csv.header = {"x1_in", "t_formula", "t_integrated", "abs_gap"};
  double worst = 0.0;
  for (double x : x_list) {
    const double tf = passage_time(sys, x);
    const double ti = passage_time_integrated(sys, x);
    worst = std::max(worst, std::fabs(tf - ti));
    csv.add_row({x, tf, ti, std::fabs(tf - ti)});
  }
  write_file(out_path(args, "passage.csv"), csv.to_string());
  write_file(out_path(args, "passage_summary.json"),
             json{{"worst_abs_gap", worst}, {"tolerance", 1e-8}, {"holds", worst <= 1e-8}}.dump(2) +
                 "\n");
  if (worst > 1e-8) {
    std::cerr << "passage-check: formula vs integration gap " << fmt17(worst) << "\n";
    return kExitInequality;
  }
  return kExitOk;
}

// --- quotient -------------------------------------------------------------------

int run_quotient(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const FlowSystem sys = flow_from_json(cfg.at("flow"));
  json resolved = {{"flow", cfg.at("flow")}};

  if (sys.kind == FlowKind::geometric_lorenz) {
    const auto n_table = cfg.value("n_table", std::size_t{512});
    resolved["n_table"] = n_table;
    echo_config(args, "quotient", resolved);
    GeometricLorenzMap P(sys.theta, sys.B, sys.nu);
    const auto f = collapse_foliation(P);
    CsvTable csv;
    csv.header = {"x", "quotient", "lorenz_theta", "abs_gap"};
    double worst = 0.0;
    for (std::size_t i = 0; i < n_table; ++i) {
      const double x = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_table);
      const double q = P.base(x), fx = eval(f, x);
      worst = std::max(worst, std::fabs(q - fx));
      csv.add_row({x, q, fx, std::fabs(q - fx)});
    }
    const double resid = semiconjugacy_residual(P, f, 4096);
    write_file(out_path(args, "quotient_table.csv"), csv.to_string());
    write_file(out_path(args, "quotient_summary.json"),
               json{{"kind", "geometric_lorenz"},
                    {"table_gap_sup", worst},
                    {"semiconjugacy_residual", resid},
                    {"map", map_descriptor(f)}}
                       .dump(2) +
                   "\n");
    return kExitOk;
  }

  // simulated flow: gather returns, then collapse the fitted stable foliation
  const CrossSection section = section_from_json(cfg.value("section", json::object()));
  const auto n_orbits = cfg.value("n_orbits", std::size_t{64});
  const double warmup = cfg.value("warmup", 20.0);
  resolved["section"] = cfg.value("section", json::object());
  resolved["n_orbits"] = n_orbits;
  resolved["warmup"] = warmup;
  echo_config(args, "quotient", resolved);
  std::mt19937_64 rng(args.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<ReturnRecord> records;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < n_orbits; ++i) {
    const State3 raw{-10.0 + 20.0 * unif(rng), -10.0 + 20.0 * unif(rng), 15.0 + 20.0 * unif(rng)};
    try {
      const State3 x = integrate(sys, raw, warmup).endpoint();
      auto [u0, v0] = section.to_uv(x);
      if (!section.in_bounds(u0, v0)) {
        ++failures;
        continue;
      }
      records.push_back(poincare_return(sys, section, u0, v0, 0.0));
    } catch (const std::exception& e) {
      ++failures;
      log(args, "orbit " + std::to_string(i) + " failed: " + e.what());
    }
  }
  if (records.size() < 16) {
    std::cerr << "quotient: only " << records.size() << " usable returns\n";
    return kExitConvergence;
  }
  const QuotientTable table = collapse_foliation(sys, section, records);
  CsvTable csv;
  csv.header = {"leaf_in", "leaf_out"};
  std::string plot;
  for (std::size_t i = 0; i < table.leaf_in.size(); ++i) {
    csv.add_row({table.leaf_in[i], table.leaf_out[i]});
    plot += fmt17(table.leaf_in[i]) + " " + fmt17(table.leaf_out[i]) + "\n";
  }
  write_file(out_path(args, "quotient_table.csv"), csv.to_string());
  write_file(out_path(args, "quotient_table.dat"), plot);
  write_file(out_path(args, "quotient_summary.json"),
             json{{"kind", "simulated"},
                  {"cut", table.cut},
                  {"residual", table.residual},
                  {"n_returns", records.size()},
                  {"n_failures", failures}}
                     .dump(2) +
                 "\n");
  return kExitOk;
}

// --- stability -------------------------------------------------------------------

int run_stability(const CommonArgs& args) {
  const json cfg = read_json_file(args.config_path);
  const std::string family = cfg.value("family", "perturbed_doubling");
  const double base_param = cfg.value("base_param", 0.75);
  const auto eps_list = cfg.at("eps_list").get<std::vector<double>>();
  SweepConfig sc;
  sc.n_cells = cfg.value("n_cells", std::size_t{4096});
  sc.with_birkhoff = cfg.value("with_birkhoff", false);
  sc.birkhoff_horizon = cfg.value("birkhoff_horizon", std::size_t{1000000});
  sc.with_flow_level = cfg.value("with_flow_level", false);
  sc.lift_depth = cfg.value("lift_depth", 4);
  sc.seed = args.seed;
  json resolved = {{"family", family},
                   {"base_param", base_param},
                   {"eps_list", eps_list},
                   {"n_cells", sc.n_cells},
                   {"with_birkhoff", sc.with_birkhoff},
                   {"birkhoff_horizon", sc.birkhoff_horizon},
                   {"with_flow_level", sc.with_flow_level},
                   {"lift_depth", sc.lift_depth}};
  echo_config(args, "stability", resolved);
  const StabilityReport rep = stability_sweep(family, base_param, eps_list, sc);
  CsvTable csv;
  csv.header = {"eps",       "map_distance_bound", "op_distance_lower",
                "op_distance_upper", "density_gap_l1",     "weakstar_gap_quotient",
                "weakstar_gap_flow", "birkhoff_gap"};
  std::string plot;
  std::size_t completed = 0;
  for (const auto& r : rep.rows) {
    csv.add_row({r.eps, r.map_distance_bound, r.op_distance_lower, r.op_distance_upper,
                 r.density_gap_l1, r.weakstar_gap_quotient, r.weakstar_gap_flow, r.birkhoff_gap});
    if (r.error.empty()) {
      ++completed;
      if (r.eps > 0.0 && r.density_gap_l1 > 0.0)
        plot += fmt17(r.eps) + " " + fmt17(r.density_gap_l1) + "\n";
    } else {
      log(args, "eps " + fmt17(r.eps) + " failed: " + r.error);
    }
  }
  write_file(out_path(args, "stability.csv"), csv.to_string());
  write_file(out_path(args, "stability.dat"), plot);
  write_file(out_path(args, "stability.json"), to_json(rep).dump(2) + "\n");
  if (completed == 0) {
    std::cerr << "stability: every epsilon row failed\n";
    return kExitConvergence;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statstab: statistical-stability experiments for expanding maps and "
               "Lorenz-like flows"};
  app.require_subcommand(1);
  CommonArgs args;
  int (*runner)(const CommonArgs&) = nullptr;
  auto wire = [&](const char* name, const char* desc, int (*fn)(const CommonArgs&)) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    add_common(cmd, args);
    cmd->callback([&runner, fn]() { runner = fn; });
  };
  wire("density", "invariant density of an expanding interval map", run_density);
  wire("ly-check", "Lasota-Yorke constants and inequality verification", run_ly_check);
  wire("op-distance", "transfer-operator distance vs certified bound", run_op_distance);
  wire("flow-sim", "flow integration, singularity spectra, Poincare returns", run_flow_sim);
  wire("passage-check", "flow-box passage time: formula vs integration", run_passage_check);
  wire("quotient", "stable-foliation collapse to the quotient interval map", run_quotient);
  wire("stability", "statistical-stability sweep over a perturbation family", run_stability);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return runner(args);
  } catch (const BadParameters& e) {
    std::cerr << "parameter infeasibility: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NoContractingK& e) {
    std::cerr << "parameter infeasibility: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NoConvergence& e) {
    std::cerr << "convergence failure: " << e.what() << "\n";
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
