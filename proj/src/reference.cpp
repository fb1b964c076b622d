#include "dgne/reference.hpp"

#include <cmath>

#include "dgne/constants.hpp"
#include "dgne/error.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

Eigen::MatrixXd coupling_jacobian(const GameSpec& game, const Eigen::VectorXd& x) {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(idx(game.coupling_dim), idx(game.total_dim()));
  for (std::size_t i = 0; i < game.num_agents() && game.coupling_dim > 0; ++i) {
    G.middleCols(idx(game.offset(i)), idx(game.dims[i])) = game.coupling[i].jacobian(game.block(x, i));
  }
  return G;
}

double spectral_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Eigen::MatrixXd>(A).singularValues()[0];
}

ConvexSet reference_set(const GameSpec& folded) {
  return ConvexSet::product({folded.action_set(), ConvexSet::orthant(folded.coupling_dim)});
}

}  // namespace

ReferenceFlow::ReferenceFlow(const GameSpec& game)
    : folded_(game.has_locals() ? fold_local_constraints(game) : game),
      n_(folded_.total_dim()),
      m_(folded_.coupling_dim),
      set_(reference_set(folded_)) {
  folded_.validate();
}

Eigen::VectorXd ReferenceFlow::raw_field(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dimension(), "reference state");
  const Eigen::VectorXd x = state.head(idx(n_));
  const Eigen::VectorXd lambda = state.tail(idx(m_));
  Eigen::VectorXd out(state.size());
  Eigen::VectorXd dx = -pseudo_gradient(folded_, x);
  if (m_ > 0) {
    for (std::size_t i = 0; i < folded_.num_agents(); ++i) {
      dx.segment(idx(folded_.offset(i)), idx(folded_.dims[i])) -=
          agent_coupling_transpose(folded_, i, folded_.block(x, i), lambda);
    }
  }
  out.head(idx(n_)) = dx;
  if (m_ > 0) out.tail(idx(m_)) = coupling_value(folded_, x);
  return out;
}

MetricRecord ReferenceFlow::metrics(const Eigen::VectorXd& state) const {
  MetricRecord r;
  const Eigen::VectorXd x = state.head(idx(n_));
  const Eigen::VectorXd lambda = state.tail(idx(m_)).cwiseMax(0.0);
  r.kkt_residual = kkt_residual(folded_, x, lambda);
  if (m_ > 0) r.constraint_violation = coupling_value(folded_, x).cwiseMax(0.0).norm();
  return r;
}

double reference_step(const GameSpec& game, const Eigen::VectorXd& x) {
  const GameSpec folded = game.has_locals() ? fold_local_constraints(game) : game;
  const double theta0 = spectral_norm(pseudo_gradient_jacobian(folded, x));
  const double gnorm = spectral_norm(coupling_jacobian(folded, x));
  const double denom = theta0 + gnorm;
  return denom > 0.0 ? 0.5 / denom : 0.5;
}

KktPoint solve_reference_vgne(const GameSpec& game, double tol, const ReferenceOptions& options) {
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tolerance must be positive", tol);
  const ReferenceFlow flow(game);
  const auto n = game.total_dim();
  const auto m = flow.folded().coupling_dim;

  Eigen::VectorXd x0 = options.x0 ? *options.x0 : Eigen::VectorXd::Zero(idx(n));
  require_dim(static_cast<std::size_t>(x0.size()), n, "initial action profile");
  x0 = project_euclidean(game.action_set(), x0);

  Eigen::VectorXd state = Eigen::VectorXd::Zero(idx(n + m));
  state.head(idx(n)) = x0;

  const double h = options.step ? *options.step : reference_step(game, x0);
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "reference step must be positive", h);

  const ConvexSet& set = flow.admissible_set();
  double residual = flow.metrics(state).kkt_residual;
  for (std::size_t k = 0; k < options.max_steps; ++k) {
    if (k % options.check_every == 0) {
      residual = flow.metrics(state).kkt_residual;
      if (residual <= tol) break;
      if (!state.allFinite()) throw Error(ErrorKind::Divergence, "reference flow diverged", residual);
    }
    state.noalias() += h * flow.raw_field(state);
    project_in_place(set, state);
  }
  residual = flow.metrics(state).kkt_residual;
  if (!(residual <= tol)) {
    throw Error(ErrorKind::NonConvergence, "reference solver did not reach the requested residual", residual);
  }

  KktPoint p;
  p.x = state.head(idx(n));
  const Eigen::VectorXd all = state.tail(idx(m));
  p.lambda = all.head(idx(game.coupling_dim));
  p.lambda_loc = all.tail(idx(m - game.coupling_dim));
  p.residual = residual;
  return p;
}

}  // namespace dgne
