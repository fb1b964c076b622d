#pragma once

// Game constants (strong monotonicity and Lipschitz moduli), the gain lower
// bounds that depend on them, and sampling-based estimators. Estimated
// constants are estimates over the sampled region, not certified bounds.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>

#include "dgne/game.hpp"

namespace dgne {

struct GameConstants {
  double mu = 0.0;      // strong monotonicity of F
  double theta0 = 0.0;  // Lipschitz constant of F
  double theta = 0.0;   // Lipschitz constant of bold-F, within [mu, theta0]
  std::optional<double> theta_sigma;  // Lipschitz constant of F~(x, .)

  /// Builds constants with theta defaulting to theta0 when not supplied.
  static GameConstants with_default_theta(double mu, double theta0);
};

/// c_ = ((theta0 + theta)^2 + 4 mu theta) / (4 mu lambda2)
double min_constant_gain(const GameConstants& constants, double lambda2);
/// k_ = ((theta0 + theta)^2 + 4 mu theta) / (4 mu lambda2^2)
double min_adaptive_gain(const GameConstants& constants, double lambda2);
/// theta_sigma^2 / (4 mu lambda2), or / (4 mu lambda2^2) when adaptive.
double min_gain_aggregative(const GameConstants& constants, double lambda2, bool adaptive);

/// 2x2 matrix bounding the restricted monotonicity of the adaptive-gain
/// estimate dynamics: [[mu/N, -(theta0+theta)/(2 sqrt N)], [., k* lambda2^2 - theta]].
Eigen::Matrix2d restricted_monotonicity_matrix(const GameConstants& constants, std::size_t num_agents,
                                               double lambda2, double k_star);
/// Aggregative analogue: [[mu, -theta_sigma/2], [., k* lambda2^2]].
Eigen::Matrix2d aggregative_monotonicity_matrix(const GameConstants& constants, double lambda2, double k_star);

/// Sample points are drawn uniformly in [lower, upper] (per action coordinate).
struct SamplerConfig {
  std::size_t count = 200;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::uint64_t seed = 0;
  /// Also probe central-difference Jacobians at sampled points.
  bool jacobian_probes = true;

  static SamplerConfig around(const Eigen::VectorXd& center, double half_width, std::size_t count, std::uint64_t seed);
};

/// mu^ = min (F(a)-F(b))'(a-b)/|a-b|^2, theta0^ = max |F(a)-F(b)|/|a-b| over
/// sampled pairs (and symmetric-part / spectral-norm probes of sampled
/// Jacobians); theta^ the same for bold-F. Throws ErrorKind::AssumptionViolation
/// ("strong monotonicity not detected", value = mu^) when mu^ <= 0.
GameConstants estimate_game_constants(const GameSpec& game, const SamplerConfig& sampler);

/// As above for the induced general game, plus theta_sigma^ of F~(x, .).
GameConstants estimate_aggregative_constants(const AggregativeGameSpec& agg, const SamplerConfig& sampler);

/// Central-difference Jacobian of the pseudo-gradient.
Eigen::MatrixXd pseudo_gradient_jacobian(const GameSpec& game, const Eigen::VectorXd& x);

}  // namespace dgne
