#pragma once

// Run configuration: one JSON document per run. Every level is validated
// and unknown keys are rejected with ErrorKind::Config.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>

#include "dgne/dynamics.hpp"
#include "dgne/scenarios.hpp"
#include "dgne/verify.hpp"

namespace dgne {

/// Scenario parameter overrides; only the fields relevant to the chosen
/// scenario are used.
struct ScenarioOverrides {
  std::optional<std::size_t> num_agents;      // sensor, el-fleet
  std::optional<std::size_t> num_firms;       // cournot
  std::optional<std::size_t> num_markets;     // cournot
  std::optional<double> edge_probability;
  std::optional<double> participation;        // cournot
  std::optional<bool> zero_price_slope;       // cournot
  std::optional<bool> zero_iso_charge;        // cournot
  std::optional<TurbineParams> turbine;       // cournot
  /// Replaces the seeded communication graph.
  std::optional<nlohmann::json> graph;
};

struct RunConfig {
  std::string scenario = "sensor";
  std::uint64_t seed = 0;
  ScenarioOverrides overrides;
  /// Game definition when scenario == "quadratic".
  nlohmann::json quadratic;
  /// "alg1" ... "alg5" or "oracle".
  std::string algorithm = "alg1";
  std::optional<double> c;
  /// Scalar or per-agent; empty means ones.
  Eigen::VectorXd gamma;
  bool use_plant = false;
  IntegratorConfig integrator;
  /// False when the config left the step open; cmd_run then uses
  /// 1e-3 / (1 + theta0 estimate).
  bool step_given = false;
  double reference_tol = 1e-10;
  std::string out = ".";
  std::string format = "csv";
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

IntegratorConfig parse_integrator_config(const nlohmann::json& j, IntegratorConfig base = {});

/// Builds the scenario a config names, applying overrides.
ScenarioBundle build_configured_scenario(const RunConfig& config);

/// Quadratic game from JSON:
///   {"dims": [n_1, ...], "M": n x n, "q": n,          F(x) = M x + q
///    "sets": [set, ...], "coupling": {"A": m x n, "b": m},
///    "graph": {"num_agents": N, "edges": [[i, j], ...]}, "x0": n}
/// The coupling A x <= b is split as g_i(x_i) = A_i x_i - b / N.
ScenarioBundle build_quadratic_bundle(const nlohmann::json& j, std::uint64_t seed = 0);

/// AlgorithmRun for one of alg1..alg5.
AlgorithmRun to_algorithm_run(const RunConfig& config);

}  // namespace dgne
