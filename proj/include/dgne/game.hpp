#pragma once

// Game model: N agents with private action blocks x_i in R^{n_i}, local sets
// Omega_i, separable coupling constraints g(x) = sum_i g_i(x_i) <= 0 and
// per-agent cost gradients. Action profiles are stacked agent-major into
// R^n, n = sum_i n_i.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

#include "dgne/geometry.hpp"

namespace dgne {

/// A vector-valued constraint function of one agent's action together with
/// its Jacobian (rows x n_i).
struct AgentConstraint {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> value;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

/// Affine constraint block: A x_i - b.
AgentConstraint affine_constraint(Eigen::MatrixXd A, Eigen::VectorXd b);
/// Constraint that contributes nothing (rows zeros, Jacobian zero).
AgentConstraint zero_constraint(std::size_t rows, std::size_t cols);

/// Dimensions, local sets and constraints shared by general and aggregative
/// games.
///
/// `local_sets` are handled by projection. `locals` (optional, one entry per
/// agent, `local_rows[i]` rows each) are additional private inequality
/// constraints g^loc_i(x_i) <= 0 that are always handled by local dual
/// variables.
struct GameStructure {
  std::vector<std::size_t> dims;
  std::vector<ConvexSet> local_sets;
  std::size_t coupling_dim = 0;
  std::vector<AgentConstraint> coupling;
  std::vector<std::size_t> local_rows;
  std::vector<AgentConstraint> locals;

  std::size_t num_agents() const noexcept { return dims.size(); }
  std::size_t total_dim() const noexcept;
  std::size_t offset(std::size_t agent) const;
  std::size_t total_local_rows() const noexcept;
  std::size_t local_offset(std::size_t agent) const;
  bool has_locals() const noexcept { return total_local_rows() > 0; }

  /// Product of the Omega_i.
  ConvexSet action_set() const;

  Eigen::VectorXd block(const Eigen::VectorXd& x, std::size_t agent) const;

  /// Throws on inconsistent sizes.
  void validate() const;
};

/// Cost gradient oracle: (i, x) -> grad_{x_i} J_i evaluated on the action
/// profile x as seen by agent i (x's block i is agent i's own action).
using CostGradient = std::function<Eigen::VectorXd(std::size_t, const Eigen::VectorXd&)>;

struct GameSpec : GameStructure {
  CostGradient cost_grad;
};

/// Aggregative game with affine aggregation psi_i(x_i) = B_i x_i + d_i and
/// psi(x) = (1/N) sum_i psi_i(x_i); agent i's cost is f_i(x_i, psi(x)).
struct AggregativeGameSpec : GameStructure {
  std::size_t agg_dim = 0;
  std::vector<Eigen::MatrixXd> B;
  std::vector<Eigen::VectorXd> d;
  /// (i, x_i, sigma) -> grad_y f_i(y, sigma) at y = x_i
  std::function<Eigen::VectorXd(std::size_t, const Eigen::VectorXd&, const Eigen::VectorXd&)> f_grad_x;
  /// (i, x_i, sigma) -> grad_y f_i(x_i, y) at y = sigma
  std::function<Eigen::VectorXd(std::size_t, const Eigen::VectorXd&, const Eigen::VectorXd&)> f_grad_sigma;

  void validate_aggregation() const;
};

/// F(x) = col(grad_{x_i} J_i(x)).
Eigen::VectorXd pseudo_gradient(const GameSpec& game, const Eigen::VectorXd& x);

/// bold-F: block i is agent i's gradient evaluated on its own estimate x^i,
/// where xstack = col(x^1, ..., x^N), x^i in R^n.
Eigen::VectorXd extended_pseudo_gradient(const GameSpec& game, const Eigen::VectorXd& xstack);

/// psi(x) = (1/N) sum_i (B_i x_i + d_i).
Eigen::VectorXd aggregate(const AggregativeGameSpec& agg, const Eigen::VectorXd& x);
/// col(psi_i(x_i)) in R^{N nbar}.
Eigen::VectorXd aggregation_stack(const AggregativeGameSpec& agg, const Eigen::VectorXd& x);

/// grad_{x_i} f_i(x_i, sigma^i) including the (1/N) B_i' chain-rule term.
Eigen::VectorXd aggregative_agent_gradient(const AggregativeGameSpec& agg, std::size_t agent,
                                           const Eigen::VectorXd& xi, const Eigen::VectorXd& sigma);
/// F~(x, sigma_stack).
Eigen::VectorXd aggregative_extended_pseudo_gradient(const AggregativeGameSpec& agg, const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& sigma_stack);

/// The same game written in general form, J_i(x) = f_i(x_i, psi(x)).
GameSpec to_general_game(const AggregativeGameSpec& agg);

/// g(x) = sum_i g_i(x_i).
Eigen::VectorXd coupling_value(const GameStructure& game, const Eigen::VectorXd& x);
/// g_i(x_i).
Eigen::VectorXd agent_coupling_value(const GameStructure& game, std::size_t agent, const Eigen::VectorXd& xi);
/// dg_i(x_i)' lambda, for one agent.
Eigen::VectorXd agent_coupling_transpose(const GameStructure& game, std::size_t agent, const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& lambda);
/// col(g^loc_i(x_i)).
Eigen::VectorXd local_constraint_stack(const GameStructure& game, const Eigen::VectorXd& x);

/// Move the `locals` into extra coupling rows (agent j contributes zero to
/// agent i's rows) and relax nothing else. Multipliers of the folded game are
/// col(lambda, lambda_loc); the KKT systems coincide.
template <class Game>
Game fold_local_constraints(const Game& game);

/// Replace each Box local set by the affine rows [-I; I] x_i <= [-lower; upper]
/// (finite bounds only) placed in `locals`; the local set becomes full space.
template <class Game>
Game dualize_box_sets(const Game& game);

struct KktPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_loc;
  double residual = 0.0;
};

/// Natural residual of the v-GNE KKT system,
/// |x - proj_Omega(x - F(x) - dg(x)' lambda)| + |lambda - proj_{>=0}(lambda + g(x))|.
/// With local constraints present, lambda_loc (one block per agent) enters
/// as extra shared rows, see fold_local_constraints.
double kkt_residual(const GameSpec& game, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                    const Eigen::VectorXd& lambda_loc = Eigen::VectorXd());

}  // namespace dgne
