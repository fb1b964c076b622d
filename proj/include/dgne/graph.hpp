#pragma once

// Undirected weighted communication graphs and the Laplacian algebra used by
// every controller. Stacked vectors are laid out agent-major: block i of a
// length N*q vector is agent i's q-vector.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace dgne {

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 1.0;
};

struct Neighbor {
  std::size_t agent = 0;
  double weight = 1.0;
};

class CommGraph {
 public:
  /// Duplicate unordered pairs, self-loops, out-of-range endpoints and
  /// nonpositive weights are rejected.
  CommGraph(std::size_t num_agents, std::vector<Edge> edges);

  static CommGraph complete(std::size_t num_agents);
  static CommGraph path(std::size_t num_agents);
  static CommGraph ring(std::size_t num_agents);
  /// Erdos-Renyi G(N, p) resampled until connected.
  static CommGraph random_connected(std::size_t num_agents, double edge_probability, std::uint64_t seed);

  std::size_t num_agents() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  double degree(std::size_t i) const;

  bool is_connected() const;

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

/// L = D - W.
Eigen::MatrixXd laplacian(const CommGraph& graph);

/// Second-smallest Laplacian eigenvalue (dense symmetric eigensolver).
double algebraic_connectivity(const CommGraph& graph);
double largest_laplacian_eigenvalue(const CommGraph& graph);

/// Moore-Penrose pseudo-inverse of L.
Eigen::MatrixXd laplacian_pseudo_inverse(const CommGraph& graph);

/// (L (x) I_q) y computed from the adjacency lists.
Eigen::VectorXd apply_kron_laplacian(const CommGraph& graph, std::size_t q, const Eigen::VectorXd& y);

struct ConsensusSplit {
  Eigen::VectorXd parallel;
  Eigen::VectorXd perpendicular;
};

/// Orthogonal split of a stacked vector into its consensus component
/// (every block replaced by the block mean) and the disagreement remainder.
ConsensusSplit consensus_split(std::size_t q, const Eigen::VectorXd& y);

/// Mean of the q-blocks of y.
Eigen::VectorXd block_mean(std::size_t q, const Eigen::VectorXd& y);
/// 1_N (x) v.
Eigen::VectorXd replicate(std::size_t num_agents, const Eigen::VectorXd& v);
/// |P_perp y|
double disagreement(std::size_t q, const Eigen::VectorXd& y);

nlohmann::json to_json(const CommGraph& graph);
CommGraph comm_graph_from_json(const nlohmann::json& j);

}  // namespace dgne
