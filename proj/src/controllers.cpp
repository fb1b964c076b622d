#include "dgne/controllers.hpp"

#include <cmath>

#include "dgne/error.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void require_gamma(const Eigen::VectorXd& gamma, std::size_t N) {
  require_dim(static_cast<std::size_t>(gamma.size()), N, "gain rates");
  for (Eigen::Index i = 0; i < gamma.size(); ++i) {
    if (!(gamma[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "gain rates must be positive", gamma[i]);
  }
}

void require_gain(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorKind::InvalidArgument, "gain must be positive", c);
}

void put(Eigen::VectorXd& state, Segment s, const Eigen::VectorXd& v, const char* what) {
  require_dim(static_cast<std::size_t>(v.size()), s.size, what);
  state.segment(idx(s.offset), idx(s.size)) = v;
}

}  // namespace

std::string algorithm_id(Algorithm a) {
  switch (a) {
    case Algorithm::ConstantGain: return "alg1";
    case Algorithm::AdaptiveGain: return "alg2";
    case Algorithm::AggregativeConstant: return "alg3";
    case Algorithm::AggregativeAdaptive: return "alg4";
    case Algorithm::MultiIntegrator: return "alg5";
  }
  return "unknown";
}

Algorithm algorithm_from_id(const std::string& id) {
  if (id == "alg1") return Algorithm::ConstantGain;
  if (id == "alg2") return Algorithm::AdaptiveGain;
  if (id == "alg3") return Algorithm::AggregativeConstant;
  if (id == "alg4") return Algorithm::AggregativeAdaptive;
  if (id == "alg5") return Algorithm::MultiIntegrator;
  throw Error(ErrorKind::Config, "unknown algorithm '" + id + "'");
}

// ---------------------------------------------------------------------------

Controller::Controller(const GameStructure& structure, GameSpec general, CommGraph graph)
    : structure_(structure),
      general_(std::move(general)),
      graph_(std::move(graph)),
      set_(ConvexSet::full_space(0)) {
  structure_.validate();
  N_ = structure_.num_agents();
  n_ = structure_.total_dim();
  m_ = structure_.coupling_dim;
  if (graph_.num_agents() != N_) {
    throw Error(ErrorKind::DimensionMismatch, "graph and game disagree on the number of agents",
                static_cast<double>(graph_.num_agents()));
  }
  if (!graph_.is_connected()) throw Error(ErrorKind::Disconnected, "communication graph is not connected");
  folded_ = general_.has_locals() ? fold_local_constraints(general_) : general_;
}

Eigen::VectorXd Controller::slice(const Eigen::VectorXd& state, Segment s) {
  return state.segment(idx(s.offset), idx(s.size));
}

void Controller::finalize_layout(std::vector<ConvexSet> factors, bool adaptive) {
  primal_dim_ = 0;
  for (const auto& f : factors) primal_dim_ += f.dim();
  std::size_t off = primal_dim_;
  z_ = {off, N_ * m_};
  off += z_.size;
  lambda_ = {off, N_ * m_};
  off += lambda_.size;
  k_ = {off, adaptive ? N_ : 0};
  off += k_.size;
  loc_ = {off, structure_.total_local_rows()};
  off += loc_.size;
  dim_ = off;

  if (m_ > 0) {
    factors.push_back(ConvexSet::full_space(N_ * m_));
    factors.push_back(ConvexSet::orthant(N_ * m_));
  }
  if (adaptive) factors.push_back(ConvexSet::full_space(N_));
  if (loc_.size > 0) factors.push_back(ConvexSet::orthant(loc_.size));
  std::vector<ConvexSet> nonempty;
  for (auto& f : factors)
    if (f.dim() > 0) nonempty.push_back(std::move(f));
  set_ = ConvexSet::product(std::move(nonempty));
}

void Controller::dual_field(const Eigen::VectorXd& state, const std::vector<Eigen::VectorXd>& own,
                            Eigen::VectorXd& out) const {
  if (m_ > 0) {
    const auto mi = idx(m_);
    const Eigen::VectorXd lambda = slice(state, lambda_);
    const Eigen::VectorXd Llambda = apply_kron_laplacian(graph_, m_, lambda);
    out.segment(idx(z_.offset), idx(z_.size)) = Llambda;
    for (std::size_t i = 0; i < N_; ++i) {
      const auto b = idx(i) * mi;
      out.segment(idx(lambda_.offset) + b, mi) = agent_coupling_value(structure_, i, own[i]) -
                                                 state.segment(idx(z_.offset) + b, mi) - Llambda.segment(b, mi);
    }
  }
  for (std::size_t i = 0; i < N_ && loc_.size > 0; ++i) {
    const auto rows = structure_.local_rows[i];
    if (rows == 0) continue;
    out.segment(idx(loc_.offset + structure_.local_offset(i)), idx(rows)) = structure_.locals[i].value(own[i]);
  }
}

Eigen::VectorXd Controller::multiplier_force(const Eigen::VectorXd& state, std::size_t i,
                                             const Eigen::VectorXd& xi) const {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(idx(structure_.dims[i]));
  if (m_ > 0) {
    f.noalias() -= structure_.coupling[i].jacobian(xi).transpose() * state.segment(idx(lambda_.offset + i * m_), idx(m_));
  }
  if (loc_.size > 0 && structure_.local_rows[i] > 0) {
    f.noalias() -= structure_.locals[i].jacobian(xi).transpose() *
                   state.segment(idx(loc_.offset + structure_.local_offset(i)), idx(structure_.local_rows[i]));
  }
  return f;
}

MetricRecord Controller::metrics(const Eigen::VectorXd& state) const {
  MetricRecord r;
  const Eigen::VectorXd x = actions(state);
  Eigen::VectorXd duals(idx(m_ + loc_.size));
  if (m_ > 0) duals.head(idx(m_)) = block_mean(m_, slice(state, lambda_)).cwiseMax(0.0);
  if (loc_.size > 0) duals.tail(idx(loc_.size)) = slice(state, loc_).cwiseMax(0.0);
  r.kkt_residual = kkt_residual(folded_, x, duals);
  r.consensus_error = consensus_error(state);
  if (m_ > 0) {
    r.dual_consensus_error = disagreement(m_, slice(state, lambda_));
    r.constraint_violation = coupling_value(structure_, x).cwiseMax(0.0).norm();
  }
  if (loc_.size > 0) r.local_violation = local_constraint_stack(structure_, x).cwiseMax(0.0).norm();
  r.gains = slice(state, k_);
  r.lyapunov = lyapunov(state);
  return r;
}

void Controller::prepare_fixture(const EquilibriumFixture& fx) {
  require_dim(static_cast<std::size_t>(fx.x.size()), n_, "equilibrium actions");
  require_dim(static_cast<std::size_t>(fx.lambda.size()), m_, "equilibrium multiplier");
  require_dim(static_cast<std::size_t>(fx.lambda_loc.size()), loc_.size, "equilibrium local multipliers");
  if (k_.size > 0) require_dim(static_cast<std::size_t>(fx.k_bar.size()), N_, "reference gains");
  fixture_ = fx;
  z_bar_ = Eigen::VectorXd::Zero(idx(N_ * m_));
  if (m_ > 0) {
    const Eigen::VectorXd g = coupling_value(structure_, fx.x);
    for (std::size_t i = 0; i < N_; ++i) {
      z_bar_.segment(idx(i * m_), idx(m_)) =
          agent_coupling_value(structure_, i, structure_.block(fx.x, i)) - g / static_cast<double>(N_);
    }
  }
  const auto Ni = idx(N_);
  phi_ = Eigen::MatrixXd::Constant(Ni, Ni, 1.0 / static_cast<double>(N_)) + laplacian_pseudo_inverse(graph_);
}

double Controller::lyapunov_dual_part(const Eigen::VectorXd& state) const {
  double v = 0.0;
  if (m_ > 0) {
    const Eigen::VectorXd dz = slice(state, z_) - z_bar_;
    const Eigen::Map<const Eigen::MatrixXd> Z(dz.data(), idx(m_), idx(N_));
    v += (Z * phi_).cwiseProduct(Z).sum();
    v += (slice(state, lambda_) - replicate(N_, fixture_->lambda)).squaredNorm();
  }
  if (loc_.size > 0) v += (slice(state, loc_) - fixture_->lambda_loc).squaredNorm();
  return 0.5 * v;
}

// ---------------------------------------------------------------------------

EstimateStackController::EstimateStackController(const GameSpec& game, const CommGraph& graph, double c)
    : Controller(game, game, graph), game_(game), adaptive_(false), c_(c) {
  require_gain(c);
  init();
}

EstimateStackController::EstimateStackController(const GameSpec& game, const CommGraph& graph, Eigen::VectorXd gamma)
    : Controller(game, game, graph), game_(game), adaptive_(true), gamma_(std::move(gamma)) {
  require_gamma(gamma_, N_);
  init();
}

void EstimateStackController::init() {
  if (!game_.cost_grad) throw Error(ErrorKind::InvalidArgument, "game has no cost gradient oracle");
  std::vector<ConvexSet> factors;
  for (std::size_t i = 0; i < N_; ++i) {
    for (std::size_t j = 0; j < N_; ++j) {
      factors.push_back(j == i ? game_.local_sets[i] : ConvexSet::full_space(game_.dims[j]));
    }
  }
  finalize_layout(std::move(factors), adaptive_);
}

Eigen::VectorXd EstimateStackController::consensus_term(const Eigen::VectorXd& xstack, const Eigen::VectorXd& k) const {
  const Eigen::VectorXd rho = apply_kron_laplacian(graph_, n_, xstack);
  if (!adaptive_) return -c_ * rho;
  Eigen::VectorXd krho = rho;
  for (std::size_t i = 0; i < N_; ++i) krho.segment(idx(i * n_), idx(n_)) *= k[idx(i)];
  return -apply_kron_laplacian(graph_, n_, krho);
}

Eigen::VectorXd EstimateStackController::raw_field(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dim_, "controller state");
  const auto ni = idx(n_);
  const Eigen::VectorXd X = state.head(idx(N_ * n_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(state.size());

  Eigen::VectorXd rho;
  if (adaptive_) {
    rho = apply_kron_laplacian(graph_, n_, X);
    Eigen::VectorXd krho = rho;
    for (std::size_t i = 0; i < N_; ++i) krho.segment(idx(i) * ni, ni) *= state[idx(k_.offset + i)];
    out.head(X.size()) = -apply_kron_laplacian(graph_, n_, krho);
  } else {
    out.head(X.size()) = -c_ * apply_kron_laplacian(graph_, n_, X);
  }

  std::vector<Eigen::VectorXd> own(N_);
  for (std::size_t i = 0; i < N_; ++i) {
    const auto off = idx(i) * ni + idx(game_.offset(i));
    const auto di = idx(game_.dims[i]);
    own[i] = X.segment(off, di);
    out.segment(off, di) += -game_.cost_grad(i, X.segment(idx(i) * ni, ni)) + multiplier_force(state, i, own[i]);
  }
  dual_field(state, own, out);
  if (adaptive_) {
    for (std::size_t i = 0; i < N_; ++i) {
      out[idx(k_.offset + i)] = gamma_[idx(i)] * rho.segment(idx(i) * ni, ni).squaredNorm();
    }
  }
  return out;
}

Eigen::VectorXd EstimateStackController::actions(const Eigen::VectorXd& state) const {
  Eigen::VectorXd x(idx(n_));
  for (std::size_t i = 0; i < N_; ++i) {
    x.segment(idx(game_.offset(i)), idx(game_.dims[i])) =
        state.segment(idx(i * n_ + game_.offset(i)), idx(game_.dims[i]));
  }
  return x;
}

double EstimateStackController::consensus_error(const Eigen::VectorXd& state) const {
  return disagreement(n_, state.head(idx(N_ * n_)));
}

Eigen::VectorXd EstimateStackController::initial_state(const Eigen::VectorXd& x0) const {
  require_dim(static_cast<std::size_t>(x0.size()), n_, "initial actions");
  const Eigen::VectorXd x = project_euclidean(game_.action_set(), x0);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(idx(dim_));
  for (std::size_t i = 0; i < N_; ++i) {
    s.segment(idx(i * n_ + game_.offset(i)), idx(game_.dims[i])) = game_.block(x, i);
  }
  return s;
}

std::optional<double> EstimateStackController::lyapunov(const Eigen::VectorXd& state) const {
  if (!fixture_) return std::nullopt;
  double v = 0.5 * (state.head(idx(N_ * n_)) - replicate(N_, fixture_->x)).squaredNorm();
  if (adaptive_) {
    const Eigen::VectorXd dk = slice(state, k_) - fixture_->k_bar;
    v += 0.5 * (dk.array().square() / gamma_.array()).sum();
  }
  return v + lyapunov_dual_part(state);
}

Eigen::VectorXd EstimateStackController::pack(const EstimateStackState& s) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx(dim_));
  put(out, {0, N_ * n_}, s.xstack, "estimate stack");
  if (m_ > 0) {
    put(out, z_, s.z, "z stack");
    put(out, lambda_, s.lambda, "multiplier stack");
  }
  if (adaptive_) put(out, k_, s.k, "gains");
  if (loc_.size > 0) put(out, loc_, s.lambda_loc, "local multipliers");
  return out;
}

EstimateStackState EstimateStackController::unpack(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dim_, "controller state");
  return {state.head(idx(N_ * n_)), slice(state, z_), slice(state, lambda_), slice(state, k_), slice(state, loc_)};
}

// ---------------------------------------------------------------------------

AggregativeController::AggregativeController(const AggregativeGameSpec& agg, const CommGraph& graph, double c)
    : Controller(agg, to_general_game(agg), graph), agg_(agg), adaptive_(false), c_(c) {
  require_gain(c);
  init();
}

AggregativeController::AggregativeController(const AggregativeGameSpec& agg, const CommGraph& graph,
                                             Eigen::VectorXd gamma)
    : Controller(agg, to_general_game(agg), graph), agg_(agg), adaptive_(true), gamma_(std::move(gamma)) {
  require_gamma(gamma_, N_);
  init();
}

void AggregativeController::init() {
  agg_.validate_aggregation();
  std::vector<ConvexSet> factors = agg_.local_sets;
  factors.push_back(ConvexSet::full_space(N_ * agg_.agg_dim));
  finalize_layout(std::move(factors), adaptive_);
}

Eigen::VectorXd AggregativeController::sigma(const Eigen::VectorXd& state) const {
  return aggregation_stack(agg_, state.head(idx(n_))) + slice(state, varsigma_segment());
}

Eigen::VectorXd AggregativeController::raw_field(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dim_, "controller state");
  const auto q = idx(agg_.agg_dim);
  const Eigen::VectorXd x = state.head(idx(n_));
  const Eigen::VectorXd sig = sigma(state);
  const Eigen::VectorXd rho = apply_kron_laplacian(graph_, agg_.agg_dim, sig);
  Eigen::VectorXd w;
  if (adaptive_) {
    Eigen::VectorXd krho = rho;
    for (std::size_t i = 0; i < N_; ++i) krho.segment(idx(i) * q, q) *= state[idx(k_.offset + i)];
    w = apply_kron_laplacian(graph_, agg_.agg_dim, krho);
  } else {
    w = c_ * rho;
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(state.size());
  std::vector<Eigen::VectorXd> own(N_);
  for (std::size_t i = 0; i < N_; ++i) {
    const auto off = idx(agg_.offset(i));
    const auto di = idx(agg_.dims[i]);
    own[i] = x.segment(off, di);
    out.segment(off, di) = -aggregative_agent_gradient(agg_, i, own[i], sig.segment(idx(i) * q, q)) -
                           agg_.B[i].transpose() * w.segment(idx(i) * q, q) + multiplier_force(state, i, own[i]);
  }
  const Segment vs = varsigma_segment();
  out.segment(idx(vs.offset), idx(vs.size)) = -w;
  dual_field(state, own, out);
  if (adaptive_) {
    for (std::size_t i = 0; i < N_; ++i) {
      out[idx(k_.offset + i)] = gamma_[idx(i)] * rho.segment(idx(i) * q, q).squaredNorm();
    }
  }
  return out;
}

Eigen::VectorXd AggregativeController::actions(const Eigen::VectorXd& state) const { return state.head(idx(n_)); }

double AggregativeController::consensus_error(const Eigen::VectorXd& state) const {
  return disagreement(agg_.agg_dim, sigma(state));
}

Eigen::VectorXd AggregativeController::initial_state(const Eigen::VectorXd& x0) const {
  require_dim(static_cast<std::size_t>(x0.size()), n_, "initial actions");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(idx(dim_));
  s.head(idx(n_)) = project_euclidean(agg_.action_set(), x0);
  return s;
}

Eigen::VectorXd AggregativeController::pack(const AggregativeState& s) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx(dim_));
  put(out, x_segment(), s.x, "actions");
  put(out, varsigma_segment(), s.varsigma, "aggregate estimation errors");
  if (m_ > 0) {
    put(out, z_, s.z, "z stack");
    put(out, lambda_, s.lambda, "multiplier stack");
  }
  if (adaptive_) put(out, k_, s.k, "gains");
  if (loc_.size > 0) put(out, loc_, s.lambda_loc, "local multipliers");
  return out;
}

AggregativeState AggregativeController::unpack(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dim_, "controller state");
  return {slice(state, x_segment()), slice(state, varsigma_segment()), slice(state, z_), slice(state, lambda_),
          slice(state, k_),          slice(state, loc_)};
}

// ---------------------------------------------------------------------------

Eigen::VectorXd field_alg1(const GameSpec& game, const CommGraph& graph, double c, const EstimateStackState& state) {
  const EstimateStackController ctl(game, graph, c);
  return ctl.field(ctl.pack(state));
}

Eigen::VectorXd field_alg2(const GameSpec& game, const CommGraph& graph, const Eigen::VectorXd& gamma,
                           const EstimateStackState& state) {
  const EstimateStackController ctl(game, graph, gamma);
  return ctl.field(ctl.pack(state));
}

Eigen::VectorXd field_alg3(const AggregativeGameSpec& agg, const CommGraph& graph, double c,
                           const AggregativeState& state) {
  const AggregativeController ctl(agg, graph, c);
  return ctl.field(ctl.pack(state));
}

Eigen::VectorXd field_alg4(const AggregativeGameSpec& agg, const CommGraph& graph, const Eigen::VectorXd& gamma,
                           const AggregativeState& state) {
  const AggregativeController ctl(agg, graph, gamma);
  return ctl.field(ctl.pack(state));
}

}  // namespace dgne
