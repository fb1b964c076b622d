#include "doctest.h"

#include <random>

#include "dgne/error.hpp"
#include "dgne/graph.hpp"
#include "support.hpp"

using dgne::CommGraph;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("laplacian examples") {
  MatrixXd k2(2, 2);
  k2 << 1, -1, -1, 1;
  CHECK(dgne::laplacian(CommGraph(2, {{0, 1}})).isApprox(k2));
  MatrixXd p3(3, 3);
  p3 << 1, -1, 0, -1, 2, -1, 0, -1, 1;
  CHECK(dgne::laplacian(CommGraph::path(3)).isApprox(p3));
  CHECK(dgne::laplacian(CommGraph(2, {})).isZero());
}

TEST_CASE("algebraic connectivity examples") {
  CHECK(dgne::algebraic_connectivity(CommGraph(2, {{0, 1}})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(dgne::algebraic_connectivity(CommGraph::path(3)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(dgne::algebraic_connectivity(CommGraph::complete(5)) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(dgne::algebraic_connectivity(CommGraph(3, {{0, 1}})) == doctest::Approx(0.0));
  CHECK_THROWS_AS(dgne::algebraic_connectivity(CommGraph(1, {})), dgne::Error);
}

TEST_CASE("kron laplacian examples") {
  const CommGraph k2(2, {{0, 1}});
  CHECK(dgne::apply_kron_laplacian(k2, 1, Eigen::Vector2d(1, 2)).isApprox(Eigen::Vector2d(-1, 1)));
  Eigen::Vector4d y(1, 0, 0, 1);
  CHECK(dgne::apply_kron_laplacian(k2, 2, y).isApprox(Eigen::Vector4d(1, -1, -1, 1)));
  const auto g = CommGraph::random_connected(5, 0.5, 2);
  CHECK(dgne::apply_kron_laplacian(g, 3, dgne::replicate(5, Eigen::Vector3d(1, -2, 4))).norm() <= 1e-14);
  CHECK_THROWS_AS(dgne::apply_kron_laplacian(k2, 2, Eigen::Vector3d(1, 2, 3)), dgne::Error);
}

TEST_CASE("kron laplacian agrees with the dense product") {
  std::mt19937_64 rng(1);
  for (std::size_t N = 2; N <= 5; ++N) {
    for (std::size_t q = 1; q <= 3; ++q) {
      std::vector<dgne::Edge> edges;
      for (std::size_t i = 0; i + 1 < N; ++i) edges.push_back({i, i + 1, 0.5 + static_cast<double>(i)});
      if (N > 2) edges.push_back({0, N - 1, 2.5});
      const CommGraph g(N, edges);
      const VectorXd y = testing::random_vector(static_cast<Eigen::Index>(N * q), rng);
      CHECK((dgne::apply_kron_laplacian(g, q, y) - testing::dense_kron_laplacian(g, q) * y).norm() <= 1e-12);
    }
  }
}

TEST_CASE("consensus split examples") {
  const auto s = dgne::consensus_split(1, Eigen::Vector2d(1, 3));
  CHECK(s.parallel.isApprox(Eigen::Vector2d(2, 2)));
  CHECK(s.perpendicular.isApprox(Eigen::Vector2d(-1, 1)));
  CHECK(dgne::consensus_split(2, dgne::replicate(3, Eigen::Vector2d(4, 5))).perpendicular.norm() <= 1e-15);
  CHECK(dgne::consensus_split(2, Eigen::Vector4d(1, 2, -1, -2)).parallel.norm() <= 1e-15);
  std::mt19937_64 rng(4);
  const VectorXd y = testing::random_vector(12, rng);
  const auto r = dgne::consensus_split(3, y);
  CHECK((r.parallel + r.perpendicular - y).norm() <= 1e-14);
  CHECK(y.squaredNorm() == doctest::Approx(r.parallel.squaredNorm() + r.perpendicular.squaredNorm()));
}

TEST_CASE("laplacian is psd and bounds the disagreement") {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    const auto g = CommGraph::random_connected(6, 0.4, static_cast<std::uint64_t>(t));
    const double l2 = dgne::algebraic_connectivity(g);
    for (int s = 0; s < 20; ++s) {
      const VectorXd y = testing::random_vector(12, rng);
      const double quad = y.dot(dgne::apply_kron_laplacian(g, 2, y));
      CHECK(quad >= -1e-12);
      const double perp = dgne::disagreement(2, y);
      CHECK(quad >= l2 * perp * perp - 1e-10);
    }
  }
}

TEST_CASE("random connected graphs are connected and seeded") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = CommGraph::random_connected(8, 0.2, seed);
    const auto b = CommGraph::random_connected(8, 0.2, seed);
    CHECK(a.is_connected());
    CHECK(dgne::to_json(a) == dgne::to_json(b));
  }
}

TEST_CASE("pseudo inverse of the laplacian") {
  const auto g = CommGraph::random_connected(6, 0.5, 3);
  const MatrixXd L = dgne::laplacian(g);
  const MatrixXd P = dgne::laplacian_pseudo_inverse(g);
  CHECK((L * P * L - L).norm() <= 1e-10);
  CHECK((P * L * P - P).norm() <= 1e-10);
  CHECK((P - P.transpose()).norm() <= 1e-12);
}

TEST_CASE("graph validation and json") {
  CHECK_THROWS_AS(CommGraph(3, {{0, 0}}), dgne::Error);
  CHECK_THROWS_AS(CommGraph(3, {{0, 1}, {1, 0}}), dgne::Error);
  CHECK_THROWS_AS(CommGraph(3, {{0, 5}}), dgne::Error);
  CHECK_THROWS_AS(CommGraph(3, {{0, 1, -1.0}}), dgne::Error);
  const CommGraph g(3, {{0, 1}, {1, 2, 2.5}});
  const auto back = dgne::comm_graph_from_json(dgne::to_json(g));
  CHECK(dgne::laplacian(back).isApprox(dgne::laplacian(g)));
  CHECK(dgne::block_mean(2, Eigen::Vector4d(1, 2, 3, 4)).isApprox(Eigen::Vector2d(2, 3)));
}
