#include "dgne/graph.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <random>
#include <set>

#include "dgne/error.hpp"

namespace dgne {

CommGraph::CommGraph(std::size_t num_agents, std::vector<Edge> edges)
    : n_(num_agents), edges_(std::move(edges)), adjacency_(num_agents) {
  if (n_ == 0) throw Error(ErrorKind::InvalidArgument, "graph needs at least one agent");
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (auto& e : edges_) {
    if (e.i >= n_ || e.j >= n_) throw Error(ErrorKind::InvalidArgument, "edge endpoint out of range");
    if (e.i == e.j) throw Error(ErrorKind::InvalidArgument, "self-loops are not allowed");
    if (!(e.weight > 0.0)) throw Error(ErrorKind::InvalidArgument, "edge weights must be positive");
    if (e.i > e.j) std::swap(e.i, e.j);
    if (!seen.emplace(e.i, e.j).second) {
      throw Error(ErrorKind::InvalidArgument,
                  "duplicate edge (" + std::to_string(e.i) + "," + std::to_string(e.j) + ")");
    }
    adjacency_[e.i].push_back({e.j, e.weight});
    adjacency_[e.j].push_back({e.i, e.weight});
  }
}

CommGraph CommGraph::complete(std::size_t num_agents) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < num_agents; ++i)
    for (std::size_t j = i + 1; j < num_agents; ++j) edges.push_back({i, j, 1.0});
  return CommGraph(num_agents, std::move(edges));
}

CommGraph CommGraph::path(std::size_t num_agents) {
  std::vector<Edge> edges;
  for (std::size_t i = 0; i + 1 < num_agents; ++i) edges.push_back({i, i + 1, 1.0});
  return CommGraph(num_agents, std::move(edges));
}

CommGraph CommGraph::ring(std::size_t num_agents) {
  if (num_agents < 3) return path(num_agents);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < num_agents; ++i) edges.push_back({i, (i + 1) % num_agents, 1.0});
  return CommGraph(num_agents, std::move(edges));
}

CommGraph CommGraph::random_connected(std::size_t num_agents, double edge_probability, std::uint64_t seed) {
  if (!(edge_probability > 0.0 && edge_probability <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "edge probability must lie in (0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(edge_probability);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < num_agents; ++i)
      for (std::size_t j = i + 1; j < num_agents; ++j)
        if (coin(rng)) edges.push_back({i, j, 1.0});
    CommGraph g(num_agents, std::move(edges));
    if (g.is_connected()) return g;
  }
  throw Error(ErrorKind::InvalidArgument, "could not sample a connected graph");
}

double CommGraph::degree(std::size_t i) const {
  double d = 0.0;
  for (const auto& nb : adjacency_.at(i)) d += nb.weight;
  return d;
}

bool CommGraph::is_connected() const {
  std::vector<bool> seen(n_, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto i = stack.back();
    stack.pop_back();
    for (const auto& nb : adjacency_[i]) {
      if (!seen[nb.agent]) {
        seen[nb.agent] = true;
        ++count;
        stack.push_back(nb.agent);
      }
    }
  }
  return count == n_;
}

Eigen::MatrixXd laplacian(const CommGraph& graph) {
  const auto n = static_cast<Eigen::Index>(graph.num_agents());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (const auto& e : graph.edges()) {
    const auto i = static_cast<Eigen::Index>(e.i);
    const auto j = static_cast<Eigen::Index>(e.j);
    L(i, j) -= e.weight;
    L(j, i) -= e.weight;
    L(i, i) += e.weight;
    L(j, j) += e.weight;
  }
  return L;
}

namespace {
Eigen::VectorXd laplacian_spectrum(const CommGraph& graph) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(graph), Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}
}  // namespace

double algebraic_connectivity(const CommGraph& graph) {
  if (graph.num_agents() < 2) throw Error(ErrorKind::InvalidArgument, "algebraic connectivity needs N >= 2");
  const Eigen::VectorXd ev = laplacian_spectrum(graph);
  // Eigen sorts ascending; clamp roundoff below zero.
  return std::max(0.0, ev[1]);
}

double largest_laplacian_eigenvalue(const CommGraph& graph) {
  const Eigen::VectorXd ev = laplacian_spectrum(graph);
  return ev[ev.size() - 1];
}

Eigen::MatrixXd laplacian_pseudo_inverse(const CommGraph& graph) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(graph));
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index k = 0; k < ev.size(); ++k)
    if (ev[k] > cutoff) inv[k] = 1.0 / ev[k];
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::VectorXd apply_kron_laplacian(const CommGraph& graph, std::size_t q, const Eigen::VectorXd& y) {
  const auto N = graph.num_agents();
  require_dim(static_cast<std::size_t>(y.size()), N * q, "kron-Laplacian operand");
  const auto qi = static_cast<Eigen::Index>(q);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(y.size());
  for (std::size_t i = 0; i < N; ++i) {
    auto oi = out.segment(static_cast<Eigen::Index>(i) * qi, qi);
    const auto yi = y.segment(static_cast<Eigen::Index>(i) * qi, qi);
    for (const auto& nb : graph.neighbors(i)) {
      oi += nb.weight * (yi - y.segment(static_cast<Eigen::Index>(nb.agent) * qi, qi));
    }
  }
  return out;
}

Eigen::VectorXd block_mean(std::size_t q, const Eigen::VectorXd& y) {
  if (q == 0 || y.size() % static_cast<Eigen::Index>(q) != 0) {
    throw Error(ErrorKind::DimensionMismatch, "stacked vector length is not a multiple of the block size");
  }
  const auto qi = static_cast<Eigen::Index>(q);
  const auto N = y.size() / qi;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(qi);
  for (Eigen::Index i = 0; i < N; ++i) mean += y.segment(i * qi, qi);
  return mean / static_cast<double>(N);
}

Eigen::VectorXd replicate(std::size_t num_agents, const Eigen::VectorXd& v) {
  return v.replicate(static_cast<Eigen::Index>(num_agents), 1);
}

ConsensusSplit consensus_split(std::size_t q, const Eigen::VectorXd& y) {
  const Eigen::VectorXd mean = block_mean(q, y);
  ConsensusSplit split;
  split.parallel = replicate(static_cast<std::size_t>(y.size()) / q, mean);
  split.perpendicular = y - split.parallel;
  return split;
}

double disagreement(std::size_t q, const Eigen::VectorXd& y) {
  if (y.size() == 0) return 0.0;
  return consensus_split(q, y).perpendicular.norm();
}

nlohmann::json to_json(const CommGraph& graph) {
  auto edges = nlohmann::json::array();
  for (const auto& e : graph.edges()) {
    if (e.weight == 1.0) {
      edges.push_back({e.i, e.j});
    } else {
      edges.push_back({e.i, e.j, e.weight});
    }
  }
  return {{"num_agents", graph.num_agents()}, {"edges", edges}};
}

CommGraph comm_graph_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("num_agents").get<std::size_t>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() < 2 || e.size() > 3) {
        throw Error(ErrorKind::Config, "edge must be [i, j] or [i, j, weight]");
      }
      edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e.size() == 3 ? e[2].get<double>() : 1.0});
    }
    return CommGraph(n, std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed graph record: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Config) throw;
    throw Error(ErrorKind::Config, e.what());
  }
}

}  // namespace dgne
