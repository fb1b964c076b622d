#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

#include "dgne/game.hpp"
#include "dgne/graph.hpp"

namespace testing {

/// F(x) = M x + q with optional shared rows A x <= b split as A_i x_i - b / N.
inline dgne::GameSpec affine_game(const std::vector<std::size_t>& dims, const Eigen::MatrixXd& M,
                                  const Eigen::VectorXd& q, std::vector<dgne::ConvexSet> sets = {},
                                  const Eigen::MatrixXd& A = Eigen::MatrixXd(), const Eigen::VectorXd& b = Eigen::VectorXd()) {
  dgne::GameSpec g;
  g.dims = dims;
  const std::size_t N = dims.size();
  if (sets.empty())
    for (auto d : dims) sets.push_back(dgne::ConvexSet::full_space(d));
  g.local_sets = sets;
  std::vector<Eigen::Index> off(N, 0);
  for (std::size_t i = 1; i < N; ++i) off[i] = off[i - 1] + static_cast<Eigen::Index>(dims[i - 1]);
  if (A.rows() > 0) {
    g.coupling_dim = static_cast<std::size_t>(A.rows());
    for (std::size_t i = 0; i < N; ++i)
      g.coupling.push_back(dgne::affine_constraint(A.middleCols(off[i], static_cast<Eigen::Index>(dims[i])),
                                                   b / static_cast<double>(N)));
  }
  g.cost_grad = [M, q, off, dims](std::size_t i, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const auto d = static_cast<Eigen::Index>(dims[i]);
    return M.middleRows(off[i], d) * x + q.segment(off[i], d);
  };
  g.validate();
  return g;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd v(n);
  for (auto& e : v) e = u(rng);
  return v;
}

/// Dense L kron I_q built entry by entry.
inline Eigen::MatrixXd dense_kron_laplacian(const dgne::CommGraph& g, std::size_t q) {
  const auto N = g.num_agents();
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  for (const auto& e : g.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i), j = static_cast<Eigen::Index>(e.j);
    L(i, j) -= e.weight;
    L(j, i) -= e.weight;
    L(i, i) += e.weight;
    L(j, j) += e.weight;
  }
  const auto Q = static_cast<Eigen::Index>(q);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(L.rows() * Q, L.cols() * Q);
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    for (Eigen::Index j = 0; j < L.cols(); ++j)
      for (Eigen::Index k = 0; k < Q; ++k) K(i * Q + k, j * Q + k) = L(i, j);
  return K;
}

}  // namespace testing
