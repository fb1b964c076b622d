#include "dgne/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "dgne/constants.hpp"
#include "dgne/error.hpp"
#include "dgne/graph.hpp"
#include "dgne/multi_integrator.hpp"
#include "dgne/reference.hpp"
#include "dgne/verify.hpp"

namespace dgne {

namespace {

using nlohmann::json;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw Error(ErrorKind::Config, "cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::Config, "cannot write '" + path.string() + "'");
  f << text;
}

/// State coordinates holding the physical actions.
std::vector<std::size_t> action_columns(const Controller& c) {
  const GameSpec& g = c.general_game();
  const std::size_t n = g.total_dim();
  std::vector<std::size_t> cols;
  if (const auto* ms = dynamic_cast<const MultiIntegratorController*>(&c)) {
    for (std::size_t i = 0; i < g.num_agents(); ++i)
      for (std::size_t k = 0; k < g.dims[i]; ++k) cols.push_back(ms->chain_offset(i, k));
  } else if (dynamic_cast<const AggregativeController*>(&c)) {
    for (std::size_t k = 0; k < n; ++k) cols.push_back(k);
  } else {
    for (std::size_t i = 0; i < g.num_agents(); ++i)
      for (std::size_t k = 0; k < g.dims[i]; ++k) cols.push_back(i * n + g.offset(i) + k);
  }
  return cols;
}

json trajectory_json(const Trajectory& traj, const std::vector<std::size_t>& cols) {
  json records = json::array();
  for (std::size_t r = 0; r < traj.metrics.size(); ++r) {
    json rec = to_json(traj.metrics[r]);
    rec["t"] = traj.times[r];
    if (r < traj.snapshots.size()) {
      std::vector<double> x;
      for (auto c : cols) x.push_back(traj.snapshots[r][idx(c)]);
      rec["x"] = x;
    }
    records.push_back(std::move(rec));
  }
  return {{"format", "dgne-trajectory v1"}, {"records", records}};
}

void write_trajectory(const std::filesystem::path& dir, const std::string& format, const Trajectory& traj,
                      const std::vector<std::size_t>& cols) {
  const bool have_states = !traj.snapshots.empty();
  if (format == "json") {
    write_file(dir / "trajectory.json", trajectory_json(traj, have_states ? cols : std::vector<std::size_t>{}).dump(1) +
                                            "\n");
    return;
  }
  std::vector<std::size_t> used = have_states ? cols : std::vector<std::size_t>{};
  std::vector<std::string> names;
  for (std::size_t k = 0; k < used.size(); ++k) names.push_back("x" + std::to_string(k));
  std::ofstream f(dir / "trajectory.csv", std::ios::binary);
  if (!f) throw Error(ErrorKind::Config, "cannot write trajectory.csv");
  write_trajectory_csv(f, traj, used, names);
}

template <class F>
int guarded(const CliContext& ctx, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    *ctx.err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const json::exception& e) {
    *ctx.err << "error: malformed JSON: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int exit_code_for(const Error& error) {
  switch (error.kind()) {
    case ErrorKind::Config:
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::NotInSet:
      return kExitConfig;
    case ErrorKind::Divergence:
      return kExitDivergence;
    case ErrorKind::AssumptionViolation:
    case ErrorKind::Disconnected:
      return kExitAssumption;
    case ErrorKind::NonConvergence:
      return kExitNotConverged;
  }
  return kExitNotConverged;
}

int cmd_run(const RunConfig& config, const CliContext& ctx) {
  return guarded(ctx, [&]() -> int {
    const ScenarioBundle bundle = build_configured_scenario(config);
    const auto dir = prepare_dir(config.out);
    json summary{{"config", to_json(config)}, {"scenario", bundle.name}, {"seed", bundle.seed}};

    if (config.algorithm == "oracle") {
      ReferenceOptions ro;
      ro.x0 = bundle.initial_actions;
      const KktPoint ref = solve_reference_vgne(bundle.game, config.reference_tol, ro);
      json fixture{{"scenario", bundle.name}, {"seed", bundle.seed},      {"x", vec_json(ref.x)},
                   {"lambda", vec_json(ref.lambda)}, {"lambda_loc", vec_json(ref.lambda_loc)},
                   {"kkt_residual", ref.residual}};
      write_file(dir / "reference.json", fixture.dump(1) + "\n");
      summary["converged"] = true;
      summary["kkt_residual"] = ref.residual;
      write_file(dir / "summary.json", summary.dump(1) + "\n");
      if (!ctx.quiet) *ctx.out << "oracle: kkt residual " << ref.residual << ", fixture written to "
                               << (dir / "reference.json").string() << "\n";
      return kExitOk;
    }

    AlgorithmRun run = to_algorithm_run(config);
    if (!config.step_given) {
      const BundleConstants bc = estimate_bundle_constants(bundle);
      run.integrator.step = 1e-3 / (1.0 + bc.constants.theta0);
      summary["default_step"] = run.integrator.step;
    }
    const auto controller = make_controller(bundle, run);
    const auto cols = action_columns(*controller);
    const Eigen::VectorXd s0 = controller->initial_state(bundle.initial_actions);

    Trajectory traj;
    bool diverged = false;
    std::string divergence;
    try {
      traj = integrate(*controller, s0, run.integrator);
    } catch (const DivergenceError& e) {
      diverged = true;
      divergence = e.what();
      traj = e.partial();
    }
    write_trajectory(dir, config.format, traj, cols);
    summary.update(trajectory_summary(traj));
    summary["diverged"] = diverged;
    if (diverged) summary["error"] = divergence;
    if (traj.final_state.size() > 0) summary["x"] = vec_json(controller->actions(traj.final_state));
    write_file(dir / "summary.json", summary.dump(1) + "\n");

    if (diverged) {
      *ctx.err << "error: " << divergence << "\n";
      return kExitDivergence;
    }
    if (!ctx.quiet) {
      const auto& last = traj.metrics.back();
      *ctx.out << config.algorithm << " on " << bundle.name << ": " << (traj.converged ? "converged" : "not converged")
               << " after " << traj.steps << " steps, kkt " << last.kkt_residual << ", consensus "
               << last.consensus_error << ", " << traj.wall_seconds << " s\n";
    }
    if (!traj.converged) {
      *ctx.err << "run did not meet the convergence tolerance within the horizon\n";
      return kExitNotConverged;
    }
    return kExitOk;
  });
}

int cmd_gains(const RunConfig& config, std::size_t samples, bool json_output, const CliContext& ctx) {
  return guarded(ctx, [&]() -> int {
    const ScenarioBundle bundle = build_configured_scenario(config);
    if (!bundle.graph.is_connected()) {
      *ctx.err << "error: communication graph is not connected; no gain bound exists\n";
      return kExitAssumption;
    }
    BundleConstants bc;
    try {
      bc = estimate_bundle_constants(bundle, samples, config.seed);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::AssumptionViolation) throw;
      *ctx.err << "warning: " << e.what() << "\n";
      return kExitAssumption;
    }
    const auto& k = bc.constants;
    json j{{"scenario", bundle.name},
           {"seed", bundle.seed},
           {"mu", k.mu},
           {"theta0", k.theta0},
           {"theta", k.theta},
           {"lambda2", bc.lambda2},
           {"c_bar_lambda2", bc.c_bar},
           {"k_bar_lambda2_squared", bc.k_bar},
           {"recommended_constant_gain", std::max(bc.c_bar, bc.k_bar)}};
    if (k.theta_sigma) {
      j["theta_sigma"] = *k.theta_sigma;
      j["aggregative_c_bar_lambda2"] = bc.c_bar_aggregative;
      j["aggregative_k_bar_lambda2_squared"] = bc.k_bar_aggregative;
      j["recommended_aggregative_gain"] = std::max(bc.c_bar_aggregative, bc.k_bar_aggregative);
    }
    if (json_output) {
      *ctx.out << j.dump(1) << "\n";
      return kExitOk;
    }
    auto& o = *ctx.out;
    o << std::setprecision(6);
    o << "scenario " << bundle.name << " seed " << bundle.seed << " (sampled estimates)\n";
    o << "  mu^        " << k.mu << "\n";
    o << "  theta0^    " << k.theta0 << "\n";
    o << "  theta^     " << k.theta << "\n";
    if (k.theta_sigma) o << "  theta~_sig " << *k.theta_sigma << "\n";
    o << "  lambda2    " << bc.lambda2 << "\n";
    o << "  constant-gain bound, / lambda2   " << bc.c_bar << "\n";
    o << "  adaptive bound,      / lambda2^2 " << bc.k_bar << "\n";
    if (k.theta_sigma) {
      o << "  aggregative bound,   / lambda2   " << bc.c_bar_aggregative << "\n";
      o << "  aggregative bound,   / lambda2^2 " << bc.k_bar_aggregative << "\n";
    }
    o << "  recommended c (larger of the two) " << std::max(bc.c_bar, bc.k_bar) << "\n";
    if (k.theta_sigma) {
      o << "  recommended aggregative c        " << std::max(bc.c_bar_aggregative, bc.k_bar_aggregative) << "\n";
    }
    return kExitOk;
  });
}

std::vector<std::string> verify_suites() { return {"sensor-cross", "cournot-cross", "el-cross", "lemma-ineq", "geometry"}; }

int cmd_verify(const std::string& suite, std::uint64_t seed, const std::optional<std::string>& out,
               const CliContext& ctx) {
  const auto suites = verify_suites();
  if (std::find(suites.begin(), suites.end(), suite) == suites.end()) {
    *ctx.err << "error: unknown suite '" << suite << "'; available:";
    for (const auto& s : suites) *ctx.err << " " << s;
    *ctx.err << "\n";
    return kExitConfig;
  }
  return guarded(ctx, [&]() -> int {
    json report;
    bool passed = false;
    std::string text;

    auto integrator = [](double h, double T, double tol) {
      IntegratorConfig c;
      c.step = h;
      c.horizon = T;
      c.tol = tol;
      c.stride = 1000;
      c.keep_snapshots = false;
      return c;
    };
    auto make_run = [](Algorithm a, double c, const IntegratorConfig& ic) {
      AlgorithmRun r;
      r.algorithm = a;
      r.c = c;
      r.integrator = ic;
      return r;
    };

    if (suite == "sensor-cross" || suite == "cournot-cross" || suite == "el-cross") {
      std::vector<AlgorithmRun> runs;
      ScenarioBundle bundle;
      if (suite == "sensor-cross") {
        bundle = build_sensor_network(seed);
        const auto ic = integrator(1e-3, 200.0, 1e-9);
        runs = {make_run(Algorithm::ConstantGain, 30.0, ic), make_run(Algorithm::AdaptiveGain, 0.0, ic)};
      } else if (suite == "el-cross") {
        bundle = build_euler_lagrange_fleet(seed);
        const auto ic = integrator(1e-3, 300.0, 1e-9);
        runs = {make_run(Algorithm::AdaptiveGain, 0.0, ic), make_run(Algorithm::MultiIntegrator, 0.0, ic)};
        runs.back().use_plant = true;
      } else {
        bundle = build_cournot_market(seed);
        const auto ic = integrator(1.5e-3, 1400.0, 2e-5);
        runs = {make_run(Algorithm::AggregativeConstant, 30.0, ic), make_run(Algorithm::AggregativeAdaptive, 0.0, ic),
                make_run(Algorithm::ConstantGain, 30.0, ic)};
      }
      const VerificationReport r = cross_validate(bundle, runs, 1e-3);
      report = r.to_json();
      passed = r.passed;
      text = r.summary();
    } else if (suite == "lemma-ineq") {
      const ScenarioBundle bundle = build_sensor_network(seed);
      LemmaOptions above;
      above.seed = seed;
      LemmaOptions below = above;
      below.gain_factor = 0.9;
      const LemmaReport ra = check_lemma_inequalities(bundle, above);
      const LemmaReport rb = check_lemma_inequalities(bundle, below);
      passed = ra.passed && rb.passed;
      report = {{"above_bound", ra.to_json()}, {"below_bound", rb.to_json()}, {"passed", passed}};
      std::ostringstream os;
      for (const auto* rep : {&ra, &rb}) {
        for (const auto& c : rep->checks) {
          os << "  " << c.name << " k*=" << c.k_star << " lambda_min=" << c.lambda_min
             << (c.positive_definite ? " (PD)" : " (not PD)");
          if (c.samples > 0) os << " worst margin " << c.worst_margin << " over " << c.samples << " samples";
          os << (c.passed ? " ok" : " FAILED") << "\n";
        }
      }
      text = "lemma-ineq seed " + std::to_string(seed) + ": " + (passed ? "PASS" : "FAIL") + "\n" + os.str();
    } else {
      const GeometryReport g = check_geometry_properties(10000, seed);
      report = g.to_json();
      passed = g.passed;
      std::ostringstream os;
      os << "geometry: " << (passed ? "PASS" : "FAIL") << " orthogonality defect " << g.max_orthogonality_defect
         << ", minorant violation " << g.max_minorant_violation << ", cone violation " << g.max_cone_violation << "\n";
      text = os.str();
    }

    if (out) write_file(prepare_dir(*out) / ("verify-" + suite + ".json"), report.dump(1) + "\n");
    if (!ctx.quiet) *ctx.out << text;
    return passed ? kExitOk : kExitNotConverged;
  });
}

int cmd_export(const RunConfig& config, const std::optional<std::string>& out, const CliContext& ctx) {
  return guarded(ctx, [&]() -> int {
    const ScenarioBundle bundle = build_configured_scenario(config);
    const std::string text = to_json(bundle).dump(1) + "\n";
    if (out) {
      const auto path = prepare_dir(*out) / "scenario.json";
      write_file(path, text);
      if (!ctx.quiet) *ctx.out << "wrote " << path.string() << "\n";
    } else {
      *ctx.out << text;
    }
    return kExitOk;
  });
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed generalized Nash equilibrium seeking"};
  app.require_subcommand(1);

  std::string config_path, scenario, format, suite;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false, json_output = false;
  std::size_t samples = 200;

  auto* run = app.add_subcommand("run", "integrate one algorithm on one scenario");
  run->add_option("--config", config_path, "run configuration (JSON)")->required();
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--format", format, "trajectory format")->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--quiet", quiet);

  auto* gains = app.add_subcommand("gains", "estimate constants and gain bounds");
  gains->add_option("--config", config_path, "run configuration (JSON)");
  gains->add_option("--scenario", scenario, "scenario name");
  gains->add_option("--seed", seed, "scenario seed");
  gains->add_option("--samples", samples, "sample count for the estimates");
  gains->add_flag("--json", json_output, "print JSON");
  gains->add_flag("--quiet", quiet);

  auto* verify = app.add_subcommand("verify", "run a verification suite");
  verify->add_option("suite", suite, "sensor-cross | cournot-cross | el-cross | lemma-ineq | geometry")->required();
  verify->add_option("--seed", seed, "scenario seed");
  verify->add_option("--out", out_dir, "directory for the JSON report");
  verify->add_flag("--quiet", quiet);

  auto* exp = app.add_subcommand("export", "write a scenario description");
  exp->add_option("--config", config_path, "run configuration (JSON)");
  exp->add_option("--scenario", scenario, "scenario name");
  exp->add_option("--seed", seed, "scenario seed");
  exp->add_option("--out", out_dir, "output directory");
  exp->add_flag("--quiet", quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitConfig;
  }

  CliContext ctx{&out, &err, quiet};
  auto load = [&]() -> RunConfig {
    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
    } else if (!scenario.empty()) {
      json j{{"scenario", scenario}};
      cfg = parse_run_config(j);
    } else {
      throw Error(ErrorKind::Config, "give --config or --scenario");
    }
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.out = *out_dir;
    if (!format.empty()) cfg.format = format;
    return cfg;
  };

  if (verify->parsed()) return cmd_verify(suite, seed.value_or(0), out_dir, ctx);

  RunConfig cfg;
  try {
    cfg = load();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  if (run->parsed()) return cmd_run(cfg, ctx);
  if (gains->parsed()) return cmd_gains(cfg, samples, json_output, ctx);
  return cmd_export(cfg, out_dir, ctx);
}

}  // namespace dgne
