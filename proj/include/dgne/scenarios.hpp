#pragma once

// Seeded builders for the benchmark games: a mobile sensor network (static
// and with Euler-Lagrange vehicles) and a Cournot power market with turbine
// dynamics.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dgne/constants.hpp"
#include "dgne/game.hpp"
#include "dgne/graph.hpp"
#include "dgne/multi_integrator.hpp"

namespace dgne {

struct ScenarioBundle {
  std::string name;
  std::uint64_t seed = 0;
  /// General-form game (aggregative games are converted).
  GameSpec game;
  std::optional<AggregativeGameSpec> aggregative;
  CommGraph graph = CommGraph(1, {});
  /// Integrator-chain orders per agent and coordinate; empty for static agents.
  std::vector<std::vector<int>> orders;
  PlantHook plant;
  /// Seeded initial actions inside Omega.
  Eigen::VectorXd initial_actions;
  /// Box used for constant estimation.
  Eigen::VectorXd sample_lower;
  Eigen::VectorXd sample_upper;
  /// Drawn parameters, for audit export.
  nlohmann::json parameters;
};

/// Estimated constants with the gain bounds derived from them.
struct BundleConstants {
  GameConstants constants;
  double lambda2 = 0.0;
  double c_bar = 0.0;        // divides by lambda2
  double k_bar = 0.0;        // divides by lambda2^2
  double c_bar_aggregative = 0.0;
  double k_bar_aggregative = 0.0;
};

BundleConstants estimate_bundle_constants(const ScenarioBundle& bundle, std::size_t samples = 200,
                                          std::uint64_t seed = 0);

// ---------------------------------------------------------------------------

struct SensorNetworkOptions {
  std::size_t num_agents = 5;
  double edge_probability = 0.5;
};

/// N planar agents, J_i = |x_i|^2 + d_i'x_i + sin(p^x_i) + sum_j |x_i - x_j|^2,
/// 0.1 <= p^y_i <= 0.5, Chebyshev distance <= 1/5 across every edge (4 rows
/// per edge) and average squared distance to the base (0, 0.3) <= 1/2.
ScenarioBundle build_sensor_network(std::uint64_t seed, const SensorNetworkOptions& options = {});

/// The sensor game with y-boxes dualized and double-integrator agents
/// driven through the Euler-Lagrange vehicle model.
ScenarioBundle build_euler_lagrange_fleet(std::uint64_t seed, const SensorNetworkOptions& options = {});

struct EulerLagrangeModel {
  Eigen::Matrix2d inertia(const Eigen::Vector2d& x) const;
  Eigen::Matrix2d coriolis(const Eigen::Vector2d& x, const Eigen::Vector2d& xdot) const;
  Eigen::Vector2d gravity() const { return {0.0, -1.0}; }
  /// I xdd + C xd + U = u  solved for xdd.
  Eigen::Vector2d acceleration(const Eigen::Vector2d& x, const Eigen::Vector2d& xdot, const Eigen::Vector2d& u) const;
};

/// u = I(x) a + C(x, xdot) xdot + U.
Eigen::Vector2d feedback_linearize_el(const EulerLagrangeModel& model, const Eigen::Vector2d& x,
                                      const Eigen::Vector2d& xdot, const Eigen::Vector2d& a);

// ---------------------------------------------------------------------------

struct TurbineParams {
  double alpha1 = 5.0;
  double alpha2 = 5.0;
  double alpha3 = 4.0;
  double alpha4 = 4.0;
  void validate() const;
};

/// Input u making P'' = a for P' = -a1 P + a2 R, R' = -a3 R + a4 u.
double feedback_linearize_turbine(const TurbineParams& p, double P, double R, double a);
/// P'' of the turbine model for a given input.
double turbine_power_acceleration(const TurbineParams& p, double P, double R, double u);

struct CournotOptions {
  std::size_t num_firms = 20;
  std::size_t num_markets = 7;
  double edge_probability = 0.3;
  double participation = 0.5;
  bool zero_price_slope = false;  // chi = 0
  bool zero_iso_charge = false;   // w = 0
  TurbineParams turbine;
};

/// Firms producing in random subsets of the markets; aggregation
/// psi(x) = (1/N) A x, prices P - chi (A x), capacity boxes, dualized
/// market-share rows and shared market capacities A x <= r. Throws
/// AssumptionViolation when the sampled game is not strongly monotone.
ScenarioBundle build_cournot_market(std::uint64_t seed, const CournotOptions& options = {});

/// Dense selection matrix A = [A_1 ... A_N] of a Cournot bundle.
Eigen::MatrixXd cournot_market_matrix(const ScenarioBundle& bundle);

nlohmann::json to_json(const ScenarioBundle& bundle);

/// Builds a bundle by name: "sensor", "el-fleet", "cournot".
ScenarioBundle build_scenario(const std::string& name, std::uint64_t seed);

}  // namespace dgne
