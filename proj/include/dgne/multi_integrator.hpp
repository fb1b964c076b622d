#pragma once

// Agents whose action coordinates are the outputs of integrator chains
//
//   x_{i,k}^{(r_{i,k})} = u_{i,k},
//
// driven by the adaptive-gain controller applied to the transformed outputs
// zeta_{i,k} = x_{i,k} + sum_{j=1}^{r-1} c_j x_{i,k}^{(j)} and the input
// u = u~ - sum_{j=1}^{r-1} c_{j-1} x^{(j)}, which makes zeta' = u~ exactly.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

#include "dgne/controllers.hpp"

namespace dgne {

/// Ascending coefficients of (s+1)^{r-1}; r >= 2.
Eigen::VectorXd hurwitz_coeffs(int r);

/// Companion matrix of the higher-derivative subsystem v' = E v (u~ = 0),
/// v = (x', ..., x^{(r-1)}). Hurwitz iff the coefficients are.
Eigen::MatrixXd chain_companion_matrix(const Eigen::VectorXd& coeffs);

struct ZetaTransform {
  double zeta = 0.0;
  /// (x', ..., x^{(r-1)}); empty for r = 1.
  Eigen::VectorXd v;
};

/// chain = (x, x', ..., x^{(r-1)}); coeffs has length r (ignored for r = 1).
ZetaTransform zeta_transform(const Eigen::VectorXd& chain, const Eigen::VectorXd& coeffs);

/// u = u~ - sum_{j=1}^{r-1} c_{j-1} x^{(j)}.
double physical_input(double u_tilde, const Eigen::VectorXd& chain, const Eigen::VectorXd& coeffs);

/// Maps the commanded accelerations of agent i (all coordinates of order 2)
/// to the accelerations the plant actually realizes, given positions and
/// velocities. Used to close the loop through a physical model.
using PlantHook = std::function<Eigen::VectorXd(std::size_t agent, const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& xdot, const Eigen::VectorXd& accel)>;

struct MultiIntegratorSpec {
  /// orders[i][k] = r_{i,k} >= 1.
  std::vector<std::vector<int>> orders;
  /// Optional per-coordinate overrides; empty entries use hurwitz_coeffs.
  std::vector<std::vector<Eigen::VectorXd>> coeffs;
  PlantHook plant;
};

/// Adaptive-gain controller on the zeta-system. Requires every
/// Omega_i to be the full space (bounded sets must be dualized first).
class MultiIntegratorController : public Controller {
 public:
  MultiIntegratorController(const GameSpec& game, const CommGraph& graph, Eigen::VectorXd gamma,
                            MultiIntegratorSpec spec);

  Algorithm algorithm() const override { return Algorithm::MultiIntegrator; }
  Eigen::VectorXd raw_field(const Eigen::VectorXd& state) const override;
  Eigen::VectorXd actions(const Eigen::VectorXd& state) const override;
  double consensus_error(const Eigen::VectorXd& state) const override;
  /// Chains at rest at x0, zeta estimates of the others at 0.
  Eigen::VectorXd initial_state(const Eigen::VectorXd& x0) const override;

  /// Stacked higher derivatives v of all chains.
  Eigen::VectorXd chain_derivatives(const Eigen::VectorXd& state) const;
  /// zeta recomputed from the chains.
  Eigen::VectorXd zeta_from_chains(const Eigen::VectorXd& state) const;
  /// Own blocks of the stored zeta stack.
  Eigen::VectorXd zeta_diagonal(const Eigen::VectorXd& state) const;

  Segment chain_segment() const noexcept { return {0, chain_total_}; }
  Segment zeta_segment() const noexcept { return {chain_total_, N_ * n_}; }
  /// Offset of coordinate (i, k)'s chain and its order.
  std::size_t chain_offset(std::size_t agent, std::size_t coord) const { return chain_off_[agent][coord]; }
  int order(std::size_t agent, std::size_t coord) const { return spec_.orders[agent][coord]; }
  const Eigen::VectorXd& coefficients(std::size_t agent, std::size_t coord) const { return coeffs_[agent][coord]; }

 private:
  GameSpec game_;
  Eigen::VectorXd gamma_;
  MultiIntegratorSpec spec_;
  std::vector<std::vector<std::size_t>> chain_off_;
  std::vector<std::vector<Eigen::VectorXd>> coeffs_;
  std::vector<bool> plant_ok_;
  std::size_t chain_total_ = 0;
};

}  // namespace dgne
