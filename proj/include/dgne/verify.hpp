#pragma once

// Verification drivers: cross-validation of the distributed controllers
// against the centralized oracle, sampled checks of the restricted
// monotonicity inequalities, and randomized geometry properties.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgne/constants.hpp"
#include "dgne/controllers.hpp"
#include "dgne/dynamics.hpp"
#include "dgne/reference.hpp"
#include "dgne/scenarios.hpp"

namespace dgne {

struct AlgorithmRun {
  Algorithm algorithm = Algorithm::ConstantGain;
  /// Constant gain for alg1/alg3.
  double c = 0.0;
  /// Gain rates for alg2/alg4/alg5; empty means all ones.
  Eigen::VectorXd gamma;
  IntegratorConfig integrator;
  /// Close the alg5 loop through the bundle's plant model.
  bool use_plant = false;
  std::string label;  // defaults to the algorithm id
};

/// Builds the controller an AlgorithmRun describes for a bundle. alg3/alg4
/// need an aggregative bundle; alg5 needs chain orders (all ones otherwise)
/// and unconstrained action sets.
std::unique_ptr<Controller> make_controller(const ScenarioBundle& bundle, const AlgorithmRun& run);

struct RunOutcome {
  std::string label;
  Algorithm algorithm = Algorithm::ConstantGain;
  Eigen::VectorXd x;
  MetricRecord final_metrics;
  bool converged = false;
  bool diverged = false;
  std::string error;
  double wall_seconds = 0.0;
  std::size_t steps = 0;
  Trajectory trajectory;
};

/// Integrates one run from the bundle's initial actions.
RunOutcome execute_run(const ScenarioBundle& bundle, const AlgorithmRun& run);

struct VerificationReport {
  std::string scenario;
  std::uint64_t seed = 0;
  KktPoint reference;
  std::vector<RunOutcome> runs;
  /// Pairwise primal distances between runs (symmetric).
  Eigen::MatrixXd pairwise;
  /// Distance of each run's final actions to the reference.
  Eigen::VectorXd to_reference;
  double tolerance = 0.0;
  std::vector<std::pair<std::string, bool>> checks;
  bool passed = false;

  nlohmann::json to_json() const;
  std::string summary() const;
};

/// Runs every algorithm (concurrently) plus the reference solver; fails when
/// a run errors or any pairwise / reference primal distance exceeds
/// `tolerance`.
VerificationReport cross_validate(const ScenarioBundle& bundle, const std::vector<AlgorithmRun>& runs,
                                  double tolerance, double reference_tol = 1e-10);

struct LemmaCheck {
  std::string name;
  Eigen::Matrix2d matrix;
  double k_under = 0.0;
  double k_star = 0.0;
  double lambda_min = 0.0;
  bool positive_definite = false;
  std::size_t samples = 0;
  /// min over samples of lhs - lambda_min |.|^2 (nan when not sampled).
  double worst_margin = 0.0;
  bool passed = false;
};

struct LemmaReport {
  GameConstants constants;
  double lambda2 = 0.0;
  std::vector<LemmaCheck> checks;
  bool passed = false;
  nlohmann::json to_json() const;
};

struct LemmaOptions {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  /// k* = factor * k_under.
  double gain_factor = 1.1;
  /// Sample half-width around the reference equilibrium.
  double sample_radius = 1.0;
  /// Half-width of the box the constants are estimated on.
  double estimate_radius = 2.0;
  std::size_t estimate_samples = 400;
  double margin_tol = 1e-8;
};

/// Estimates the constants around the reference equilibrium, assembles the
/// restricted monotonicity matrix (and the aggregative one for aggregative
/// bundles), and checks the sampled inequalities at k* = factor * k_under.
/// With factor < 1 the matrix is expected not to be positive definite and
/// no sampling is done.
LemmaReport check_lemma_inequalities(const ScenarioBundle& bundle, const LemmaOptions& options = {});

struct GeometryReport {
  std::size_t samples = 0;
  double max_orthogonality_defect = 0.0;  // |T'N| / |v|^2
  double max_reconstruction_error = 0.0;  // |v - T - N| / |v|
  double max_minorant_violation = 0.0;    // (y-y')'(T - v), should be <= 0
  double max_cone_violation = 0.0;        // T, N outside their cones
  bool passed = false;
  nlohmann::json to_json() const;
};

/// Randomized Moreau decomposition and projection-minorant checks over
/// boxes, orthants, balls, halfspaces, full spaces and their products.
GeometryReport check_geometry_properties(std::size_t samples, std::uint64_t seed);

}  // namespace dgne
