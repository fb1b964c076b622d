#pragma once

// Distributed primal-dual consensus controllers on flat state vectors.
//
// Estimate-stack controllers (constant gain c or adaptive gains k):
//   agent i keeps x^i in R^n (own action block x^i_i plus estimates of the
//   others), z_i and lambda_i in R^m.
//
//   x^i'    = -R_i'(grad_i J_i(x^i) + dg_i(x^i_i)' lambda_i) - c (L_n x)^i
//             (or - (L_n K L_n x)^i with K = diag(k_i I_n))
//   z_i'    = (L_m lambda)_i
//   lambda' = Pi_{>=0}(lambda_i, g_i(x^i_i) - z_i - (L_m lambda)_i)
//   k_i'    = gamma_i |(L_n x)^i|^2
//
// Aggregative controllers replace the estimates of the others' actions by
// estimates sigma^i = psi_i(x_i) + varsigma^i of the aggregate psi(x) and run
// the consensus on sigma.
//
// Only the own action blocks are projected (onto Omega_i). Local constraints
// listed in GameStructure::locals are dualized: the x_i field gains
// -dg^loc_i(x_i)' lambda^loc_i and lambda^loc_i' = Pi_{>=0}(lambda^loc_i, g^loc_i(x_i)).

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dgne/dynamics.hpp"
#include "dgne/game.hpp"
#include "dgne/geometry.hpp"
#include "dgne/graph.hpp"

namespace dgne {

enum class Algorithm { ConstantGain, AdaptiveGain, AggregativeConstant, AggregativeAdaptive, MultiIntegrator };

std::string algorithm_id(Algorithm a);  // "alg1" ... "alg5"
Algorithm algorithm_from_id(const std::string& id);

/// Contiguous piece of a flat state vector.
struct Segment {
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Equilibrium used by the optional Lyapunov metric. The z-component is
/// constructed from (x, lambda) as z_i = g_i(x_i) - g(x)/N.
struct EquilibriumFixture {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
  Eigen::VectorXd lambda_loc;
  /// Reference gains for the adaptive variant (ignored otherwise).
  Eigen::VectorXd k_bar;
};

/// Common behaviour of all controllers: state segments, metrics, initial
/// states.
class Controller : public FlowSystem {
 public:
  Controller(const GameStructure& structure, GameSpec general, CommGraph graph);

  std::size_t dimension() const override { return dim_; }
  const ConvexSet& admissible_set() const override { return set_; }
  MetricRecord metrics(const Eigen::VectorXd& state) const override;

  virtual Algorithm algorithm() const = 0;
  /// Physical action profile x in R^n.
  virtual Eigen::VectorXd actions(const Eigen::VectorXd& state) const = 0;
  /// Disagreement of the primal estimates (|P_perp x| or |P_perp sigma|).
  virtual double consensus_error(const Eigen::VectorXd& state) const = 0;
  /// State with the given actions and zeros everywhere else.
  virtual Eigen::VectorXd initial_state(const Eigen::VectorXd& x0) const = 0;
  virtual std::optional<double> lyapunov(const Eigen::VectorXd&) const { return std::nullopt; }

  Eigen::VectorXd z_stack(const Eigen::VectorXd& state) const { return slice(state, z_); }
  Eigen::VectorXd lambda_stack(const Eigen::VectorXd& state) const { return slice(state, lambda_); }
  Eigen::VectorXd gains(const Eigen::VectorXd& state) const { return slice(state, k_); }
  Eigen::VectorXd local_multipliers(const Eigen::VectorXd& state) const { return slice(state, loc_); }

  Segment z_segment() const noexcept { return z_; }
  Segment lambda_segment() const noexcept { return lambda_; }
  Segment gain_segment() const noexcept { return k_; }
  Segment local_segment() const noexcept { return loc_; }

  const CommGraph& graph() const noexcept { return graph_; }
  /// The game in general form (aggregative games are converted), used for KKT.
  const GameSpec& general_game() const noexcept { return general_; }

  static Eigen::VectorXd slice(const Eigen::VectorXd& state, Segment s);

 protected:
  /// Lays out [primal..., z, lambda, (k), lambda_loc] and builds the
  /// admissible set from the primal factors.
  void finalize_layout(std::vector<ConvexSet> primal_factors, bool adaptive);

  /// Writes the z, lambda and lambda_loc parts of the raw field given
  /// g_i(.) and g^loc_i(.) evaluated at the agents' own actions.
  void dual_field(const Eigen::VectorXd& state, const std::vector<Eigen::VectorXd>& own_actions,
                  Eigen::VectorXd& out) const;

  /// -dg_i' lambda_i - dg^loc_i' lambda^loc_i for agent i at x_i.
  Eigen::VectorXd multiplier_force(const Eigen::VectorXd& state, std::size_t agent, const Eigen::VectorXd& xi) const;

  double lyapunov_dual_part(const Eigen::VectorXd& state) const;
  void prepare_fixture(const EquilibriumFixture& fixture);

  GameStructure structure_;
  GameSpec general_;
  GameSpec folded_;
  CommGraph graph_;
  std::size_t N_ = 0;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t primal_dim_ = 0;
  Segment z_, lambda_, k_, loc_;
  std::size_t dim_ = 0;
  ConvexSet set_;

  std::optional<EquilibriumFixture> fixture_;
  Eigen::VectorXd z_bar_;
  Eigen::MatrixXd phi_;  // N x N, (11'/N + L^+)
};

struct EstimateStackState {
  Eigen::VectorXd xstack;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd k;
  Eigen::VectorXd lambda_loc;
};

/// alg1 (constant gain) and alg2 (adaptive gains).
class EstimateStackController : public Controller {
 public:
  /// Constant gain c > 0.
  EstimateStackController(const GameSpec& game, const CommGraph& graph, double c);
  /// Adaptive gains with rates gamma_i > 0.
  EstimateStackController(const GameSpec& game, const CommGraph& graph, Eigen::VectorXd gamma);

  Algorithm algorithm() const override {
    return adaptive_ ? Algorithm::AdaptiveGain : Algorithm::ConstantGain;
  }
  Eigen::VectorXd raw_field(const Eigen::VectorXd& state) const override;
  Eigen::VectorXd actions(const Eigen::VectorXd& state) const override;
  double consensus_error(const Eigen::VectorXd& state) const override;
  Eigen::VectorXd initial_state(const Eigen::VectorXd& x0) const override;
  std::optional<double> lyapunov(const Eigen::VectorXd& state) const override;

  void set_equilibrium(const EquilibriumFixture& fixture) { prepare_fixture(fixture); }

  Eigen::VectorXd pack(const EstimateStackState& s) const;
  EstimateStackState unpack(const Eigen::VectorXd& state) const;
  Segment xstack_segment() const noexcept { return {0, N_ * n_}; }

  /// The consensus term of the x-field, -c L_n x or -L_n K L_n x.
  Eigen::VectorXd consensus_term(const Eigen::VectorXd& xstack, const Eigen::VectorXd& k) const;

 private:
  void init();

  GameSpec game_;
  bool adaptive_ = false;
  double c_ = 0.0;
  Eigen::VectorXd gamma_;
};

struct AggregativeState {
  Eigen::VectorXd x;
  Eigen::VectorXd varsigma;
  Eigen::VectorXd z;
  Eigen::VectorXd lambda;
  Eigen::VectorXd k;
  Eigen::VectorXd lambda_loc;
};

/// alg3 (constant gain) and alg4 (adaptive gains).
class AggregativeController : public Controller {
 public:
  AggregativeController(const AggregativeGameSpec& agg, const CommGraph& graph, double c);
  AggregativeController(const AggregativeGameSpec& agg, const CommGraph& graph, Eigen::VectorXd gamma);

  Algorithm algorithm() const override {
    return adaptive_ ? Algorithm::AggregativeAdaptive : Algorithm::AggregativeConstant;
  }
  Eigen::VectorXd raw_field(const Eigen::VectorXd& state) const override;
  Eigen::VectorXd actions(const Eigen::VectorXd& state) const override;
  double consensus_error(const Eigen::VectorXd& state) const override;
  Eigen::VectorXd initial_state(const Eigen::VectorXd& x0) const override;

  /// sigma = psi_stack(x) + varsigma.
  Eigen::VectorXd sigma(const Eigen::VectorXd& state) const;

  Eigen::VectorXd pack(const AggregativeState& s) const;
  AggregativeState unpack(const Eigen::VectorXd& state) const;
  Segment x_segment() const noexcept { return {0, n_}; }
  Segment varsigma_segment() const noexcept { return {n_, N_ * agg_.agg_dim}; }

 private:
  void init();

  AggregativeGameSpec agg_;
  bool adaptive_ = false;
  double c_ = 0.0;
  Eigen::VectorXd gamma_;
};

Eigen::VectorXd field_alg1(const GameSpec& game, const CommGraph& graph, double c, const EstimateStackState& state);
Eigen::VectorXd field_alg2(const GameSpec& game, const CommGraph& graph, const Eigen::VectorXd& gamma,
                           const EstimateStackState& state);
Eigen::VectorXd field_alg3(const AggregativeGameSpec& agg, const CommGraph& graph, double c,
                           const AggregativeState& state);
Eigen::VectorXd field_alg4(const AggregativeGameSpec& agg, const CommGraph& graph, const Eigen::VectorXd& gamma,
                           const AggregativeState& state);

/// Replace the projected Box sets by dualized affine local constraints, so the
/// controllers handle them through local multipliers.
template <class Game>
Game dualize_locals(const Game& game) {
  return dualize_box_sets(game);
}

}  // namespace dgne
