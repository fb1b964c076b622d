#include "dgne/constants.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dgne/error.hpp"
#include "dgne/graph.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) throw Error(ErrorKind::InvalidArgument, std::string(what) + " must be positive", v);
}

double spectral_norm(const Eigen::MatrixXd& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()[0];
}

double min_symmetric_eigenvalue(const Eigen::MatrixXd& A) {
  const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()[0];
}

double fd_step(double v) { return 1e-6 * (1.0 + std::abs(v)); }

Eigen::VectorXd draw(std::mt19937_64& rng, const SamplerConfig& s) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(s.lower.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) x[j] = s.lower[j] + u(rng) * (s.upper[j] - s.lower[j]);
  return x;
}

struct Moduli {
  double mu = std::numeric_limits<double>::infinity();
  double theta0 = 0.0;
  double theta = 0.0;
};

Moduli sample_moduli(const GameSpec& game, const SamplerConfig& sampler) {
  const auto n = game.total_dim();
  const auto N = game.num_agents();
  require_dim(static_cast<std::size_t>(sampler.lower.size()), n, "sampler lower bound");
  require_dim(static_cast<std::size_t>(sampler.upper.size()), n, "sampler upper bound");
  if (sampler.count < 2) throw Error(ErrorKind::InvalidArgument, "sampler needs at least two samples");

  std::mt19937_64 rng(sampler.seed);
  Moduli m;
  for (std::size_t s = 0; s < sampler.count; ++s) {
    const Eigen::VectorXd a = draw(rng, sampler);
    const Eigen::VectorXd b = draw(rng, sampler);
    const Eigen::VectorXd diff = a - b;
    const double d2 = diff.squaredNorm();
    if (d2 > 0.0) {
      const Eigen::VectorXd dF = pseudo_gradient(game, a) - pseudo_gradient(game, b);
      m.mu = std::min(m.mu, dF.dot(diff) / d2);
      m.theta0 = std::max(m.theta0, dF.norm() / std::sqrt(d2));
    }

    // Extended pseudo-gradient on independent estimate stacks.
    Eigen::VectorXd xa(idx(N * n));
    Eigen::VectorXd xb(idx(N * n));
    for (std::size_t i = 0; i < N; ++i) {
      xa.segment(idx(i * n), idx(n)) = draw(rng, sampler);
      xb.segment(idx(i * n), idx(n)) = draw(rng, sampler);
    }
    const double dx = (xa - xb).norm();
    if (dx > 0.0) {
      m.theta = std::max(m.theta, (extended_pseudo_gradient(game, xa) - extended_pseudo_gradient(game, xb)).norm() / dx);
    }

    if (sampler.jacobian_probes) {
      const Eigen::MatrixXd J = pseudo_gradient_jacobian(game, a);
      m.mu = std::min(m.mu, min_symmetric_eigenvalue(J));
      m.theta0 = std::max(m.theta0, spectral_norm(J));
      // bold-F's Jacobian is block diagonal with row block i of J(x^i).
      for (std::size_t i = 0; i < N; ++i) {
        m.theta = std::max(m.theta, spectral_norm(J.middleRows(idx(game.offset(i)), idx(game.dims[i]))));
      }
    }
  }
  return m;
}

}  // namespace

GameConstants GameConstants::with_default_theta(double mu, double theta0) {
  GameConstants c;
  c.mu = mu;
  c.theta0 = theta0;
  c.theta = theta0;
  return c;
}

double min_constant_gain(const GameConstants& c, double lambda2) {
  require_positive(c.mu, "mu");
  require_positive(c.theta0, "theta0");
  require_positive(c.theta, "theta");
  require_positive(lambda2, "lambda2");
  const double s = c.theta0 + c.theta;
  return (s * s + 4.0 * c.mu * c.theta) / (4.0 * c.mu * lambda2);
}

double min_adaptive_gain(const GameConstants& c, double lambda2) {
  require_positive(lambda2, "lambda2");
  return min_constant_gain(c, lambda2) / lambda2;
}

double min_gain_aggregative(const GameConstants& c, double lambda2, bool adaptive) {
  require_positive(c.mu, "mu");
  require_positive(lambda2, "lambda2");
  if (!c.theta_sigma) throw Error(ErrorKind::InvalidArgument, "theta_sigma is required for aggregative gain bounds");
  const double ts = *c.theta_sigma;
  if (ts < 0.0) throw Error(ErrorKind::InvalidArgument, "theta_sigma must be nonnegative", ts);
  const double denom = 4.0 * c.mu * lambda2 * (adaptive ? lambda2 : 1.0);
  return ts * ts / denom;
}

Eigen::Matrix2d restricted_monotonicity_matrix(const GameConstants& c, std::size_t num_agents, double lambda2,
                                               double k_star) {
  const double N = static_cast<double>(num_agents);
  const double off = -(c.theta0 + c.theta) / (2.0 * std::sqrt(N));
  Eigen::Matrix2d M;
  M << c.mu / N, off, off, k_star * lambda2 * lambda2 - c.theta;
  return M;
}

Eigen::Matrix2d aggregative_monotonicity_matrix(const GameConstants& c, double lambda2, double k_star) {
  const double ts = c.theta_sigma.value_or(0.0);
  Eigen::Matrix2d M;
  M << c.mu, -ts / 2.0, -ts / 2.0, k_star * lambda2 * lambda2;
  return M;
}

SamplerConfig SamplerConfig::around(const Eigen::VectorXd& center, double half_width, std::size_t count,
                                    std::uint64_t seed) {
  SamplerConfig s;
  s.count = count;
  s.lower = center.array() - half_width;
  s.upper = center.array() + half_width;
  s.seed = seed;
  return s;
}

Eigen::MatrixXd pseudo_gradient_jacobian(const GameSpec& game, const Eigen::VectorXd& x) {
  const auto n = x.size();
  Eigen::MatrixXd J(n, n);
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = fd_step(x[j]);
    xp[j] = x[j] + h;
    const Eigen::VectorXd fp = pseudo_gradient(game, xp);
    xp[j] = x[j] - h;
    const Eigen::VectorXd fm = pseudo_gradient(game, xp);
    xp[j] = x[j];
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

GameConstants estimate_game_constants(const GameSpec& game, const SamplerConfig& sampler) {
  const Moduli m = sample_moduli(game, sampler);
  if (!(m.mu > 0.0)) {
    throw Error(ErrorKind::AssumptionViolation, "strong monotonicity not detected", m.mu);
  }
  GameConstants c;
  c.mu = m.mu;
  c.theta0 = m.theta0;
  c.theta = m.theta;
  return c;
}

GameConstants estimate_aggregative_constants(const AggregativeGameSpec& agg, const SamplerConfig& sampler) {
  GameConstants c = estimate_game_constants(to_general_game(agg), sampler);

  const auto N = agg.num_agents();
  const auto q = idx(agg.agg_dim);
  std::mt19937_64 rng(sampler.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double ts = 0.0;
  for (std::size_t s = 0; s < sampler.count; ++s) {
    const Eigen::VectorXd x = draw(rng, sampler);
    const Eigen::VectorXd center = replicate(N, aggregate(agg, x));
    Eigen::VectorXd sa = center;
    Eigen::VectorXd sb = center;
    for (Eigen::Index k = 0; k < sa.size(); ++k) {
      sa[k] += gauss(rng) * (1.0 + std::abs(center[k]));
      sb[k] += gauss(rng) * (1.0 + std::abs(center[k]));
    }
    const double ds = (sa - sb).norm();
    if (ds > 0.0) {
      ts = std::max(ts, (aggregative_extended_pseudo_gradient(agg, x, sa) -
                         aggregative_extended_pseudo_gradient(agg, x, sb)).norm() / ds);
    }
    if (sampler.jacobian_probes) {
      // Block i of F~ depends on sigma^i only.
      std::size_t off = 0;
      for (std::size_t i = 0; i < N; ++i) {
        const auto ni = idx(agg.dims[i]);
        const Eigen::VectorXd xi = x.segment(idx(off), ni);
        Eigen::VectorXd sig = sa.segment(idx(i) * q, q);
        Eigen::MatrixXd Js(ni, q);
        for (Eigen::Index k = 0; k < q; ++k) {
          const double h = fd_step(sig[k]);
          const double orig = sig[k];
          sig[k] = orig + h;
          const Eigen::VectorXd fp = aggregative_agent_gradient(agg, i, xi, sig);
          sig[k] = orig - h;
          const Eigen::VectorXd fm = aggregative_agent_gradient(agg, i, xi, sig);
          sig[k] = orig;
          Js.col(k) = (fp - fm) / (2.0 * h);
        }
        ts = std::max(ts, spectral_norm(Js));
        off += agg.dims[i];
      }
    }
  }
  c.theta_sigma = ts;
  return c;
}

}  // namespace dgne
