#include "dgne/game.hpp"

#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "dgne/error.hpp"

namespace dgne {

AgentConstraint affine_constraint(Eigen::MatrixXd A, Eigen::VectorXd b) {
  require_dim(static_cast<std::size_t>(b.size()), static_cast<std::size_t>(A.rows()), "affine constraint offset");
  AgentConstraint c;
  c.value = [A, b](const Eigen::VectorXd& xi) -> Eigen::VectorXd { return A * xi - b; };
  c.jacobian = [A](const Eigen::VectorXd&) -> Eigen::MatrixXd { return A; };
  return c;
}

AgentConstraint zero_constraint(std::size_t rows, std::size_t cols) {
  return affine_constraint(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)),
                           Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows)));
}

std::size_t GameStructure::total_dim() const noexcept { return std::accumulate(dims.begin(), dims.end(), std::size_t{0}); }

std::size_t GameStructure::offset(std::size_t agent) const {
  if (agent >= dims.size()) throw Error(ErrorKind::InvalidArgument, "agent index out of range");
  return std::accumulate(dims.begin(), dims.begin() + static_cast<std::ptrdiff_t>(agent), std::size_t{0});
}

std::size_t GameStructure::total_local_rows() const noexcept {
  return std::accumulate(local_rows.begin(), local_rows.end(), std::size_t{0});
}

std::size_t GameStructure::local_offset(std::size_t agent) const {
  return std::accumulate(local_rows.begin(), local_rows.begin() + static_cast<std::ptrdiff_t>(agent), std::size_t{0});
}

ConvexSet GameStructure::action_set() const { return ConvexSet::product(local_sets); }

Eigen::VectorXd GameStructure::block(const Eigen::VectorXd& x, std::size_t agent) const {
  return x.segment(static_cast<Eigen::Index>(offset(agent)), static_cast<Eigen::Index>(dims[agent]));
}

void GameStructure::validate() const {
  const auto N = dims.size();
  if (N == 0) throw Error(ErrorKind::InvalidArgument, "game needs at least one agent");
  require_dim(local_sets.size(), N, "local set count");
  for (std::size_t i = 0; i < N; ++i) {
    if (dims[i] == 0) throw Error(ErrorKind::InvalidArgument, "agent " + std::to_string(i) + " has zero dimension");
    require_dim(local_sets[i].dim(), dims[i], "local set dimension");
  }
  if (coupling_dim > 0) require_dim(coupling.size(), N, "coupling constraint count");
  if (!locals.empty() || !local_rows.empty()) {
    require_dim(locals.size(), N, "local constraint count");
    require_dim(local_rows.size(), N, "local row count");
  }
}

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

}  // namespace

Eigen::VectorXd pseudo_gradient(const GameSpec& game, const Eigen::VectorXd& x) {
  const auto n = game.total_dim();
  require_dim(static_cast<std::size_t>(x.size()), n, "action profile");
  Eigen::VectorXd F(idx(n));
  std::size_t off = 0;
  for (std::size_t i = 0; i < game.num_agents(); ++i) {
    Eigen::VectorXd gi = game.cost_grad(i, x);
    require_dim(static_cast<std::size_t>(gi.size()), game.dims[i], "cost gradient");
    F.segment(idx(off), idx(game.dims[i])) = gi;
    off += game.dims[i];
  }
  return F;
}

Eigen::VectorXd extended_pseudo_gradient(const GameSpec& game, const Eigen::VectorXd& xstack) {
  const auto n = game.total_dim();
  const auto N = game.num_agents();
  require_dim(static_cast<std::size_t>(xstack.size()), N * n, "estimate stack");
  Eigen::VectorXd F(idx(n));
  std::size_t off = 0;
  for (std::size_t i = 0; i < N; ++i) {
    Eigen::VectorXd gi = game.cost_grad(i, xstack.segment(idx(i * n), idx(n)));
    require_dim(static_cast<std::size_t>(gi.size()), game.dims[i], "cost gradient");
    F.segment(idx(off), idx(game.dims[i])) = gi;
    off += game.dims[i];
  }
  return F;
}

void AggregativeGameSpec::validate_aggregation() const {
  validate();
  require_dim(B.size(), num_agents(), "aggregation matrix count");
  require_dim(d.size(), num_agents(), "aggregation offset count");
  for (std::size_t i = 0; i < num_agents(); ++i) {
    require_dim(static_cast<std::size_t>(B[i].rows()), agg_dim, "aggregation matrix rows");
    require_dim(static_cast<std::size_t>(B[i].cols()), dims[i], "aggregation matrix cols");
    require_dim(static_cast<std::size_t>(d[i].size()), agg_dim, "aggregation offset");
  }
  if (!f_grad_x || !f_grad_sigma) throw Error(ErrorKind::InvalidArgument, "aggregative game needs both gradient oracles");
}

Eigen::VectorXd aggregation_stack(const AggregativeGameSpec& agg, const Eigen::VectorXd& x) {
  require_dim(static_cast<std::size_t>(x.size()), agg.total_dim(), "action profile");
  const auto N = agg.num_agents();
  const auto q = idx(agg.agg_dim);
  Eigen::VectorXd out(idx(N) * q);
  std::size_t off = 0;
  for (std::size_t i = 0; i < N; ++i) {
    out.segment(idx(i) * q, q) = agg.B[i] * x.segment(idx(off), idx(agg.dims[i])) + agg.d[i];
    off += agg.dims[i];
  }
  return out;
}

Eigen::VectorXd aggregate(const AggregativeGameSpec& agg, const Eigen::VectorXd& x) {
  const Eigen::VectorXd stack = aggregation_stack(agg, x);
  const auto q = idx(agg.agg_dim);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(q);
  for (std::size_t i = 0; i < agg.num_agents(); ++i) mean += stack.segment(idx(i) * q, q);
  return mean / static_cast<double>(agg.num_agents());
}

Eigen::VectorXd aggregative_agent_gradient(const AggregativeGameSpec& agg, std::size_t agent,
                                           const Eigen::VectorXd& xi, const Eigen::VectorXd& sigma) {
  Eigen::VectorXd g = agg.f_grad_x(agent, xi, sigma);
  require_dim(static_cast<std::size_t>(g.size()), agg.dims[agent], "aggregative x-gradient");
  const Eigen::VectorXd gs = agg.f_grad_sigma(agent, xi, sigma);
  require_dim(static_cast<std::size_t>(gs.size()), agg.agg_dim, "aggregative sigma-gradient");
  g.noalias() += (1.0 / static_cast<double>(agg.num_agents())) * agg.B[agent].transpose() * gs;
  return g;
}

Eigen::VectorXd aggregative_extended_pseudo_gradient(const AggregativeGameSpec& agg, const Eigen::VectorXd& x,
                                                     const Eigen::VectorXd& sigma_stack) {
  const auto N = agg.num_agents();
  const auto q = idx(agg.agg_dim);
  require_dim(static_cast<std::size_t>(x.size()), agg.total_dim(), "action profile");
  require_dim(static_cast<std::size_t>(sigma_stack.size()), N * agg.agg_dim, "aggregation estimate stack");
  Eigen::VectorXd F(x.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const auto ni = idx(agg.dims[i]);
    F.segment(idx(off), ni) =
        aggregative_agent_gradient(agg, i, x.segment(idx(off), ni), sigma_stack.segment(idx(i) * q, q));
    off += agg.dims[i];
  }
  return F;
}

GameSpec to_general_game(const AggregativeGameSpec& agg) {
  agg.validate_aggregation();
  GameSpec game;
  static_cast<GameStructure&>(game) = static_cast<const GameStructure&>(agg);
  auto shared = std::make_shared<AggregativeGameSpec>(agg);
  game.cost_grad = [shared](std::size_t i, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd sigma = aggregate(*shared, x);
    return aggregative_agent_gradient(*shared, i, shared->block(x, i), sigma);
  };
  return game;
}

Eigen::VectorXd agent_coupling_value(const GameStructure& game, std::size_t agent, const Eigen::VectorXd& xi) {
  if (game.coupling_dim == 0) return Eigen::VectorXd();
  Eigen::VectorXd v = game.coupling[agent].value(xi);
  require_dim(static_cast<std::size_t>(v.size()), game.coupling_dim, "coupling value");
  return v;
}

Eigen::VectorXd agent_coupling_transpose(const GameStructure& game, std::size_t agent, const Eigen::VectorXd& xi,
                                         const Eigen::VectorXd& lambda) {
  if (game.coupling_dim == 0) return Eigen::VectorXd::Zero(xi.size());
  const Eigen::MatrixXd J = game.coupling[agent].jacobian(xi);
  if (static_cast<std::size_t>(J.rows()) != game.coupling_dim || J.cols() != xi.size()) {
    throw Error(ErrorKind::DimensionMismatch, "coupling Jacobian of agent " + std::to_string(agent));
  }
  return J.transpose() * lambda;
}

Eigen::VectorXd coupling_value(const GameStructure& game, const Eigen::VectorXd& x) {
  require_dim(static_cast<std::size_t>(x.size()), game.total_dim(), "action profile");
  Eigen::VectorXd g = Eigen::VectorXd::Zero(idx(game.coupling_dim));
  if (game.coupling_dim == 0) return g;
  for (std::size_t i = 0; i < game.num_agents(); ++i) g += agent_coupling_value(game, i, game.block(x, i));
  return g;
}

Eigen::VectorXd local_constraint_stack(const GameStructure& game, const Eigen::VectorXd& x) {
  Eigen::VectorXd out(idx(game.total_local_rows()));
  std::size_t off = 0;
  for (std::size_t i = 0; i < game.num_agents() && game.has_locals(); ++i) {
    if (game.local_rows[i] == 0) continue;
    const Eigen::VectorXd v = game.locals[i].value(game.block(x, i));
    require_dim(static_cast<std::size_t>(v.size()), game.local_rows[i], "local constraint value");
    out.segment(idx(off), v.size()) = v;
    off += game.local_rows[i];
  }
  return out;
}

namespace {

GameStructure fold_structure(const GameStructure& in) {
  if (!in.has_locals()) return in;
  GameStructure out = in;
  const auto N = in.num_agents();
  const auto m = in.coupling_dim;
  const auto p = in.total_local_rows();
  out.coupling_dim = m + p;
  out.coupling.clear();
  for (std::size_t i = 0; i < N; ++i) {
    const auto ni = idx(in.dims[i]);
    const auto loc_off = idx(in.local_offset(i));
    const auto pi = idx(in.local_rows[i]);
    AgentConstraint base = m > 0 ? in.coupling[i] : zero_constraint(0, in.dims[i]);
    AgentConstraint local = pi > 0 ? in.locals[i] : zero_constraint(0, in.dims[i]);
    AgentConstraint folded;
    folded.value = [=](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(idx(m + p));
      if (m > 0) v.head(idx(m)) = base.value(xi);
      if (pi > 0) v.segment(idx(m) + loc_off, pi) = local.value(xi);
      return v;
    };
    folded.jacobian = [=](const Eigen::VectorXd& xi) -> Eigen::MatrixXd {
      Eigen::MatrixXd J = Eigen::MatrixXd::Zero(idx(m + p), ni);
      if (m > 0) J.topRows(idx(m)) = base.jacobian(xi);
      if (pi > 0) J.middleRows(idx(m) + loc_off, pi) = local.jacobian(xi);
      return J;
    };
    out.coupling.push_back(std::move(folded));
  }
  out.locals.clear();
  out.local_rows.clear();
  return out;
}

GameStructure dualize_boxes(const GameStructure& in) {
  GameStructure out = in;
  const auto N = in.num_agents();
  if (out.locals.empty()) {
    out.locals.assign(N, AgentConstraint{});
    out.local_rows.assign(N, 0);
  }
  for (std::size_t i = 0; i < N; ++i) {
    const auto* box = std::get_if<Box>(&in.local_sets[i].kind());
    if (box == nullptr) {
      if (!in.local_sets[i].is_full_space()) {
        throw Error(ErrorKind::InvalidArgument, "only box local sets can be dualized (agent " + std::to_string(i) + ")");
      }
      if (out.local_rows[i] == 0) out.locals[i] = zero_constraint(0, in.dims[i]);
      continue;
    }
    const auto ni = idx(in.dims[i]);
    std::vector<Eigen::VectorXd> rows;
    std::vector<double> rhs;
    for (Eigen::Index k = 0; k < ni; ++k) {
      if (std::isfinite(box->lower[k])) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(ni);
        r[k] = -1.0;
        rows.push_back(r);
        rhs.push_back(-box->lower[k]);
      }
      if (std::isfinite(box->upper[k])) {
        Eigen::VectorXd r = Eigen::VectorXd::Zero(ni);
        r[k] = 1.0;
        rows.push_back(r);
        rhs.push_back(box->upper[k]);
      }
    }
    const auto extra = idx(rows.size());
    Eigen::MatrixXd A(extra, ni);
    Eigen::VectorXd b(extra);
    for (Eigen::Index r = 0; r < extra; ++r) {
      A.row(r) = rows[static_cast<std::size_t>(r)].transpose();
      b[r] = rhs[static_cast<std::size_t>(r)];
    }
    AgentConstraint box_rows = affine_constraint(A, b);
    if (out.local_rows[i] == 0) {
      out.locals[i] = box_rows;
    } else {
      const AgentConstraint prev = out.locals[i];
      const auto prev_rows = idx(out.local_rows[i]);
      out.locals[i].value = [=](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
        Eigen::VectorXd v(prev_rows + extra);
        v << prev.value(xi), box_rows.value(xi);
        return v;
      };
      out.locals[i].jacobian = [=](const Eigen::VectorXd& xi) -> Eigen::MatrixXd {
        Eigen::MatrixXd J(prev_rows + extra, ni);
        J << prev.jacobian(xi), box_rows.jacobian(xi);
        return J;
      };
    }
    out.local_rows[i] += static_cast<std::size_t>(extra);
    out.local_sets[i] = ConvexSet::full_space(in.dims[i]);
  }
  return out;
}

}  // namespace

template <class Game>
Game fold_local_constraints(const Game& game) {
  Game out = game;
  static_cast<GameStructure&>(out) = fold_structure(game);
  return out;
}

template <class Game>
Game dualize_box_sets(const Game& game) {
  Game out = game;
  static_cast<GameStructure&>(out) = dualize_boxes(game);
  return out;
}

template GameSpec fold_local_constraints<GameSpec>(const GameSpec&);
template AggregativeGameSpec fold_local_constraints<AggregativeGameSpec>(const AggregativeGameSpec&);
template GameSpec dualize_box_sets<GameSpec>(const GameSpec&);
template AggregativeGameSpec dualize_box_sets<AggregativeGameSpec>(const AggregativeGameSpec&);

double kkt_residual(const GameSpec& game, const Eigen::VectorXd& x, const Eigen::VectorXd& lambda,
                    const Eigen::VectorXd& lambda_loc) {
  if (game.has_locals()) {
    require_dim(static_cast<std::size_t>(lambda_loc.size()), game.total_local_rows(), "local multipliers");
    Eigen::VectorXd joint(lambda.size() + lambda_loc.size());
    joint << lambda, lambda_loc;
    return kkt_residual(fold_local_constraints(game), x, joint);
  }
  require_dim(static_cast<std::size_t>(x.size()), game.total_dim(), "action profile");
  require_dim(static_cast<std::size_t>(lambda.size()), game.coupling_dim, "multiplier");
  if (lambda.size() > 0 && lambda.minCoeff() < 0.0) {
    throw Error(ErrorKind::InvalidArgument, "multipliers must be nonnegative", lambda.minCoeff());
  }
  Eigen::VectorXd step = pseudo_gradient(game, x);
  for (std::size_t i = 0; i < game.num_agents() && game.coupling_dim > 0; ++i) {
    step.segment(idx(game.offset(i)), idx(game.dims[i])) +=
        agent_coupling_transpose(game, i, game.block(x, i), lambda);
  }
  const Eigen::VectorXd primal = x - project_euclidean(game.action_set(), x - step);
  double res = primal.norm();
  if (game.coupling_dim > 0) {
    const Eigen::VectorXd g = coupling_value(game, x);
    res += (lambda - (lambda + g).cwiseMax(0.0)).norm();
  }
  return res;
}

}  // namespace dgne
