#include "dgne/multi_integrator.hpp"

#include <cmath>

#include "dgne/error.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void require_chain(const Eigen::VectorXd& chain, const Eigen::VectorXd& coeffs) {
  if (chain.size() == 0) throw Error(ErrorKind::DimensionMismatch, "integrator chain is empty");
  if (chain.size() > 1) require_dim(static_cast<std::size_t>(coeffs.size()), static_cast<std::size_t>(chain.size()), "chain coefficients");
}

}  // namespace

Eigen::VectorXd hurwitz_coeffs(int r) {
  if (r < 2) throw Error(ErrorKind::InvalidArgument, "chain order must be at least 2", r);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(r);
  c[0] = 1.0;
  for (int p = 1; p < r; ++p)
    for (int j = p; j >= 1; --j) c[j] += c[j - 1];
  return c;
}

Eigen::MatrixXd chain_companion_matrix(const Eigen::VectorXd& coeffs) {
  const auto d = coeffs.size() - 1;
  if (d < 1) throw Error(ErrorKind::InvalidArgument, "companion matrix needs order at least 2");
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j + 1 < d; ++j) E(j, j + 1) = 1.0;
  E.row(d - 1) = -coeffs.head(d).transpose();
  return E;
}

ZetaTransform zeta_transform(const Eigen::VectorXd& chain, const Eigen::VectorXd& coeffs) {
  require_chain(chain, coeffs);
  ZetaTransform t;
  t.zeta = chain[0];
  t.v = chain.tail(chain.size() - 1);
  for (Eigen::Index j = 1; j < chain.size(); ++j) t.zeta += coeffs[j] * chain[j];
  return t;
}

double physical_input(double u_tilde, const Eigen::VectorXd& chain, const Eigen::VectorXd& coeffs) {
  require_chain(chain, coeffs);
  double u = u_tilde;
  for (Eigen::Index j = 1; j < chain.size(); ++j) u -= coeffs[j - 1] * chain[j];
  return u;
}

MultiIntegratorController::MultiIntegratorController(const GameSpec& game, const CommGraph& graph,
                                                     Eigen::VectorXd gamma, MultiIntegratorSpec spec)
    : Controller(game, game, graph), game_(game), gamma_(std::move(gamma)), spec_(std::move(spec)) {
  require_dim(static_cast<std::size_t>(gamma_.size()), N_, "gain rates");
  for (Eigen::Index i = 0; i < gamma_.size(); ++i) {
    if (!(gamma_[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "gain rates must be positive", gamma_[i]);
  }
  if (!game_.cost_grad) throw Error(ErrorKind::InvalidArgument, "game has no cost gradient oracle");
  for (std::size_t i = 0; i < N_; ++i) {
    if (!game_.local_sets[i].is_full_space()) {
      throw Error(ErrorKind::AssumptionViolation,
                  "multi-integrator agents need unconstrained action sets; dualize the local sets of agent " +
                      std::to_string(i));
    }
  }
  require_dim(spec_.orders.size(), N_, "chain orders");
  if (!spec_.coeffs.empty()) require_dim(spec_.coeffs.size(), N_, "chain coefficient overrides");

  chain_off_.resize(N_);
  coeffs_.resize(N_);
  plant_ok_.assign(N_, true);
  std::size_t off = 0;
  for (std::size_t i = 0; i < N_; ++i) {
    require_dim(spec_.orders[i].size(), game_.dims[i], "chain orders of agent");
    for (std::size_t k = 0; k < game_.dims[i]; ++k) {
      const int r = spec_.orders[i][k];
      if (r < 1) throw Error(ErrorKind::InvalidArgument, "chain order must be at least 1", r);
      if (r != 2) plant_ok_[i] = false;
      Eigen::VectorXd c;
      const bool has_override = !spec_.coeffs.empty() && k < spec_.coeffs[i].size() && spec_.coeffs[i][k].size() > 0;
      if (r >= 2) {
        c = has_override ? spec_.coeffs[i][k] : hurwitz_coeffs(r);
        require_dim(static_cast<std::size_t>(c.size()), static_cast<std::size_t>(r), "chain coefficients");
        if (c[0] != 1.0 || c[r - 1] != 1.0) {
          throw Error(ErrorKind::InvalidArgument, "chain coefficients must start and end with 1");
        }
        const Eigen::VectorXcd ev = chain_companion_matrix(c).eigenvalues();
        if (ev.real().maxCoeff() >= 0.0) {
          throw Error(ErrorKind::InvalidArgument, "chain coefficients are not Hurwitz", ev.real().maxCoeff());
        }
      }
      coeffs_[i].push_back(c);
      chain_off_[i].push_back(off);
      off += static_cast<std::size_t>(r);
    }
  }
  chain_total_ = off;
  finalize_layout({ConvexSet::full_space(chain_total_), ConvexSet::full_space(N_ * n_)}, true);
}

Eigen::VectorXd MultiIntegratorController::raw_field(const Eigen::VectorXd& state) const {
  require_dim(static_cast<std::size_t>(state.size()), dim_, "controller state");
  const auto ni = idx(n_);
  const auto zo = idx(chain_total_);
  const Eigen::VectorXd Z = state.segment(zo, idx(N_ * n_));
  Eigen::VectorXd out = Eigen::VectorXd::Zero(state.size());

  const Eigen::VectorXd rho = apply_kron_laplacian(graph_, n_, Z);
  Eigen::VectorXd krho = rho;
  for (std::size_t i = 0; i < N_; ++i) krho.segment(idx(i) * ni, ni) *= state[idx(k_.offset + i)];
  Eigen::VectorXd dZ = -apply_kron_laplacian(graph_, n_, krho);

  std::vector<Eigen::VectorXd> own(N_);
  for (std::size_t i = 0; i < N_; ++i) {
    const auto off = idx(i) * ni + idx(game_.offset(i));
    const auto di = idx(game_.dims[i]);
    own[i] = Z.segment(off, di);
    dZ.segment(off, di) += -game_.cost_grad(i, Z.segment(idx(i) * ni, ni)) + multiplier_force(state, i, own[i]);
  }
  out.segment(zo, dZ.size()) = dZ;

  for (std::size_t i = 0; i < N_; ++i) {
    const auto di = game_.dims[i];
    const Eigen::VectorXd u_tilde = dZ.segment(idx(i) * ni + idx(game_.offset(i)), idx(di));
    Eigen::VectorXd accel(idx(di));
    for (std::size_t k = 0; k < di; ++k) {
      const auto co = idx(chain_off_[i][k]);
      const int r = spec_.orders[i][k];
      const Eigen::VectorXd chain = state.segment(co, r);
      out.segment(co, r - 1) = chain.tail(r - 1);
      accel[idx(k)] = r == 1 ? u_tilde[idx(k)] : physical_input(u_tilde[idx(k)], chain, coeffs_[i][k]);
    }
    if (spec_.plant && plant_ok_[i]) {
      Eigen::VectorXd pos(idx(di)), vel(idx(di));
      for (std::size_t k = 0; k < di; ++k) {
        pos[idx(k)] = state[idx(chain_off_[i][k])];
        vel[idx(k)] = state[idx(chain_off_[i][k]) + 1];
      }
      accel = spec_.plant(i, pos, vel, accel);
    }
    for (std::size_t k = 0; k < di; ++k) {
      out[idx(chain_off_[i][k]) + spec_.orders[i][k] - 1] = accel[idx(k)];
    }
  }

  dual_field(state, own, out);
  for (std::size_t i = 0; i < N_; ++i) {
    out[idx(k_.offset + i)] = gamma_[idx(i)] * rho.segment(idx(i) * ni, ni).squaredNorm();
  }
  return out;
}

Eigen::VectorXd MultiIntegratorController::actions(const Eigen::VectorXd& state) const {
  Eigen::VectorXd x(idx(n_));
  for (std::size_t i = 0; i < N_; ++i)
    for (std::size_t k = 0; k < game_.dims[i]; ++k) x[idx(game_.offset(i) + k)] = state[idx(chain_off_[i][k])];
  return x;
}

double MultiIntegratorController::consensus_error(const Eigen::VectorXd& state) const {
  return disagreement(n_, slice(state, zeta_segment()));
}

Eigen::VectorXd MultiIntegratorController::initial_state(const Eigen::VectorXd& x0) const {
  require_dim(static_cast<std::size_t>(x0.size()), n_, "initial actions");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(idx(dim_));
  for (std::size_t i = 0; i < N_; ++i) {
    for (std::size_t k = 0; k < game_.dims[i]; ++k) {
      const double xk = x0[idx(game_.offset(i) + k)];
      s[idx(chain_off_[i][k])] = xk;
      s[idx(chain_total_ + i * n_ + game_.offset(i) + k)] = xk;
    }
  }
  return s;
}

Eigen::VectorXd MultiIntegratorController::chain_derivatives(const Eigen::VectorXd& state) const {
  Eigen::VectorXd v(idx(chain_total_ - n_));
  Eigen::Index p = 0;
  for (std::size_t i = 0; i < N_; ++i) {
    for (std::size_t k = 0; k < game_.dims[i]; ++k) {
      const int r = spec_.orders[i][k];
      v.segment(p, r - 1) = state.segment(idx(chain_off_[i][k]) + 1, r - 1);
      p += r - 1;
    }
  }
  return v;
}

Eigen::VectorXd MultiIntegratorController::zeta_from_chains(const Eigen::VectorXd& state) const {
  Eigen::VectorXd z(idx(n_));
  for (std::size_t i = 0; i < N_; ++i) {
    for (std::size_t k = 0; k < game_.dims[i]; ++k) {
      const int r = spec_.orders[i][k];
      z[idx(game_.offset(i) + k)] = zeta_transform(state.segment(idx(chain_off_[i][k]), r), coeffs_[i][k]).zeta;
    }
  }
  return z;
}

Eigen::VectorXd MultiIntegratorController::zeta_diagonal(const Eigen::VectorXd& state) const {
  Eigen::VectorXd z(idx(n_));
  for (std::size_t i = 0; i < N_; ++i) {
    z.segment(idx(game_.offset(i)), idx(game_.dims[i])) =
        state.segment(idx(chain_total_ + i * n_ + game_.offset(i)), idx(game_.dims[i]));
  }
  return z;
}

}  // namespace dgne
