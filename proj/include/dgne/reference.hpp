#pragma once

// Centralized v-GNE oracle: full-information projected primal-dual flow
//
//   x' = Pi_Omega(x, -F(x) - dg(x)' lambda),   lambda' = Pi_{>=0}(lambda, g(x))
//
// integrated with the projected Euler scheme until the KKT natural residual
// drops below the requested tolerance. Local constraints are folded into the
// shared rows.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>

#include "dgne/dynamics.hpp"
#include "dgne/game.hpp"

namespace dgne {

class ReferenceFlow : public FlowSystem {
 public:
  explicit ReferenceFlow(const GameSpec& game);

  std::size_t dimension() const override { return n_ + m_; }
  const ConvexSet& admissible_set() const override { return set_; }
  Eigen::VectorXd raw_field(const Eigen::VectorXd& state) const override;
  MetricRecord metrics(const Eigen::VectorXd& state) const override;

  /// Game with locals folded into coupling rows.
  const GameSpec& folded() const noexcept { return folded_; }

 private:
  GameSpec folded_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  ConvexSet set_;
};

struct ReferenceOptions {
  /// Euler step; chosen by the 0.5 / (theta0 + |dg|) heuristic when absent.
  std::optional<double> step;
  std::size_t max_steps = 20'000'000;
  std::size_t check_every = 200;
  /// Initial action profile; projected onto Omega. Defaults to proj_Omega(0).
  std::optional<Eigen::VectorXd> x0;
};

/// Returns (x*, lambda*, lambda_loc*) with kkt_residual <= tol. Throws
/// NonConvergence (carrying the last residual) when the step budget runs out.
KktPoint solve_reference_vgne(const GameSpec& game, double tol, const ReferenceOptions& options = {});

/// The step heuristic used when none is supplied.
double reference_step(const GameSpec& game, const Eigen::VectorXd& x);

}  // namespace dgne
