#include "doctest.h"

#include <cmath>
#include <functional>
#include <random>

#include "dgne/error.hpp"
#include "dgne/scenarios.hpp"
#include "support.hpp"

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

// Central difference of a scalar cost in agent i's own block.
VectorXd fd_gradient(const std::function<double(const VectorXd&)>& J, const VectorXd& x, Eigen::Index off,
                     Eigen::Index len) {
  VectorXd g(len);
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < len; ++k) {
    VectorXd a = x, b = x;
    a[off + k] += h;
    b[off + k] -= h;
    g[k] = (J(a) - J(b)) / (2 * h);
  }
  return g;
}

VectorXd sensor_point(std::size_t N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> px(-1, 1), py(0.1, 0.5);
  VectorXd x(static_cast<Eigen::Index>(2 * N));
  for (std::size_t i = 0; i < N; ++i) {
    x[static_cast<Eigen::Index>(2 * i)] = px(rng);
    x[static_cast<Eigen::Index>(2 * i + 1)] = py(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("sensor network structure") {
  const auto b = dgne::build_sensor_network(0);
  CHECK(b.game.num_agents() == 5);
  CHECK(b.game.coupling_dim == 4 * b.graph.edges().size() + 1);
  CHECK(b.graph.is_connected());
  const auto base = b.parameters.at("base_station").get<std::vector<double>>();
  CHECK(base == std::vector<double>{0.0, 0.3});

  // All agents at the base station: every edge row is -1/5, the distance row -1/2.
  const VectorXd x = dgne::replicate(5, Vector2d(0.0, 0.3));
  const VectorXd g = dgne::coupling_value(b.game, x);
  for (Eigen::Index r = 0; r + 1 < g.size(); ++r) CHECK(g[r] == doctest::Approx(-0.2));
  CHECK(g[g.size() - 1] == doctest::Approx(-0.5));
  CHECK(b.game.action_set().contains(b.initial_actions));
}

TEST_CASE("sensor coupling agrees with the dense definition") {
  const auto b = dgne::build_sensor_network(3);
  const auto& edges = b.graph.edges();
  std::mt19937_64 rng(1);
  for (int s = 0; s < 50; ++s) {
    const VectorXd x = sensor_point(5, rng);
    VectorXd expected(static_cast<Eigen::Index>(4 * edges.size() + 1));
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const Vector2d diff = x.segment<2>(static_cast<Eigen::Index>(2 * edges[e].i)) -
                            x.segment<2>(static_cast<Eigen::Index>(2 * edges[e].j));
      for (int c = 0; c < 2; ++c) {
        expected[static_cast<Eigen::Index>(4 * e + 2 * c)] = diff[c] - 0.2;
        expected[static_cast<Eigen::Index>(4 * e + 2 * c + 1)] = -diff[c] - 0.2;
      }
    }
    double dist = 0.0;
    for (int i = 0; i < 5; ++i) dist += (x.segment<2>(2 * i) - Vector2d(0, 0.3)).squaredNorm();
    expected[expected.size() - 1] = dist / 5 - 0.5;
    CHECK((dgne::coupling_value(b.game, x) - expected).norm() <= 1e-13);

    // Jacobians by central differences.
    for (std::size_t i = 0; i < 5; ++i) {
      const VectorXd xi = b.game.block(x, i);
      const MatrixXd J = b.game.coupling[i].jacobian(xi);
      for (int k = 0; k < 2; ++k) {
        VectorXd a = xi, c = xi;
        a[k] += 1e-6;
        c[k] -= 1e-6;
        CHECK((J.col(k) - (b.game.coupling[i].value(a) - b.game.coupling[i].value(c)) / 2e-6).norm() <= 1e-7);
      }
    }
  }
}

TEST_CASE("sensor cost gradients match finite differences of the costs") {
  const auto b = dgne::build_sensor_network(7);
  const auto d = b.parameters.at("d").get<std::vector<std::vector<double>>>();
  std::mt19937_64 rng(2);
  for (int s = 0; s < 20; ++s) {
    const VectorXd x = sensor_point(5, rng);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto J = [&](const VectorXd& y) {
        const Vector2d yi = y.segment<2>(static_cast<Eigen::Index>(2 * i));
        double v = yi.squaredNorm() + d[i][0] * yi[0] + d[i][1] * yi[1] + std::sin(yi[0]);
        for (int j = 0; j < 5; ++j) v += (yi - y.segment<2>(2 * j)).squaredNorm();
        return v;
      };
      const VectorXd fd = fd_gradient(J, x, static_cast<Eigen::Index>(2 * i), 2);
      CHECK((b.game.cost_grad(i, x) - fd).norm() <= 1e-7);
    }
  }
}

TEST_CASE("sensor games are strongly monotone on the sample box") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto b = dgne::build_sensor_network(seed);
    const auto c = dgne::estimate_bundle_constants(b, 100, seed);
    CHECK(c.constants.mu > 0.0);
    CHECK(c.constants.theta0 >= c.constants.mu);
    CHECK(c.k_bar > 0.0);
  }
}

TEST_CASE("euler-lagrange fleet") {
  const auto b = dgne::build_euler_lagrange_fleet(0);
  CHECK(b.name == "el-fleet");
  for (const auto& o : b.orders) CHECK(o == std::vector<int>{2, 2});
  for (const auto& s : b.game.local_sets) CHECK(s.is_full_space());
  for (auto r : b.game.local_rows) CHECK(r == 2);
  CHECK(b.parameters.at("gravity").get<std::vector<double>>() == std::vector<double>{0.0, -1.0});

  const dgne::EulerLagrangeModel model;
  MatrixXd I0(2, 2);
  I0 << 2.6, 0.8, 0.8, 0.5;
  CHECK(model.inertia(Vector2d(0.7, 0.0)).isApprox(I0));
  std::mt19937_64 rng(4);
  for (int s = 0; s < 50; ++s) {
    const VectorXd x = testing::random_vector(2, rng), xd = testing::random_vector(2, rng);
    const VectorXd a = testing::random_vector(2, rng, 3.0);
    const Vector2d u = dgne::feedback_linearize_el(model, x, xd, a);
    CHECK((model.acceleration(x, xd, u) - a).norm() <= 1e-12);
    CHECK((b.plant(0, x, xd, a) - a).norm() <= 1e-12);
  }
}

TEST_CASE("turbine feedback linearization") {
  const dgne::TurbineParams p;
  CHECK(dgne::feedback_linearize_turbine(p, 0.0, 0.0, 1.0) == doctest::Approx(0.05));
  CHECK(dgne::turbine_power_acceleration(p, 0.0, 0.0, 0.05) == doctest::Approx(1.0));
  std::mt19937_64 rng(5);
  for (int s = 0; s < 50; ++s) {
    const VectorXd v = testing::random_vector(3, rng, 2.0);
    const double u = dgne::feedback_linearize_turbine(p, v[0], v[1], v[2]);
    CHECK(dgne::turbine_power_acceleration(p, v[0], v[1], u) == doctest::Approx(v[2]).epsilon(1e-12));
  }
  dgne::TurbineParams bad;
  bad.alpha2 = 0.0;
  CHECK_THROWS_AS(bad.validate(), dgne::Error);
}

TEST_CASE("cournot market structure and parameter ranges") {
  const auto b = dgne::build_cournot_market(0);
  REQUIRE(b.aggregative.has_value());
  CHECK(b.game.num_agents() == 20);
  CHECK(b.aggregative->agg_dim == 7);
  CHECK(b.game.coupling_dim == 7);
  const auto& p = b.parameters;
  for (const auto& f : p.at("firms")) {
    CHECK(f.at("capacity").get<double>() >= 0.3);
    CHECK(f.at("capacity").get<double>() <= 1.3);
    CHECK(f.at("share_cap").get<double>() >= 1.0);
    CHECK(f.at("share_cap").get<double>() <= 2.0);
    for (double Q : f.at("Q").get<std::vector<double>>()) CHECK((Q >= 8.0 && Q <= 16.0));
    for (double q : f.at("q").get<std::vector<double>>()) CHECK((q >= 1.0 && q <= 2.0));
    CHECK(!f.at("markets").empty());
  }
  for (double r : p.at("market_capacity").get<std::vector<double>>()) CHECK((r >= 1.0 && r <= 2.0));
  for (double P : p.at("P").get<std::vector<double>>()) CHECK((P >= 10.0 && P <= 20.0));
  for (double c : p.at("chi").get<std::vector<double>>()) CHECK((c >= 1.0 && c <= 3.0));
  CHECK((p.at("w1").get<double>() >= 0.5 && p.at("w1").get<double>() <= 1.0));
  CHECK((p.at("w2").get<double>() >= 0.0 && p.at("w2").get<double>() <= 0.1));

  const MatrixXd A = dgne::cournot_market_matrix(b);
  CHECK(A.rows() == 7);
  for (Eigen::Index j = 0; j < A.rows(); ++j) CHECK(A.row(j).sum() >= 1.0);
  CHECK(b.game.action_set().contains(b.initial_actions));
}

TEST_CASE("cournot aggregate and costs match the dense model") {
  const auto b = dgne::build_cournot_market(2);
  const auto& agg = *b.aggregative;
  const MatrixXd A = dgne::cournot_market_matrix(b);
  const auto& p = b.parameters;
  const VectorXd P = Eigen::Map<const VectorXd>(p.at("P").get<std::vector<double>>().data(), 7);
  const auto chiv = p.at("chi").get<std::vector<double>>();
  const VectorXd chi = Eigen::Map<const VectorXd>(chiv.data(), 7);
  const double w1 = p.at("w1").get<double>(), w2 = p.at("w2").get<double>();
  const auto n = static_cast<Eigen::Index>(b.game.total_dim());
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 10; ++s) {
    VectorXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) x[k] = u(rng) * b.sample_upper[k];
    CHECK((dgne::aggregate(agg, x) - A * x / 20.0).norm() <= 1e-13);
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& f = p.at("firms")[i];
      const auto Q = f.at("Q").get<std::vector<double>>();
      const auto q = f.at("q").get<std::vector<double>>();
      const auto off = static_cast<Eigen::Index>(b.game.offset(i));
      const auto len = static_cast<Eigen::Index>(b.game.dims[i]);
      const MatrixXd Ai = A.middleCols(off, len);
      const auto J = [&](const VectorXd& z) {
        const VectorXd y = z.segment(off, len);
        double v = 0.0;
        for (Eigen::Index k = 0; k < len; ++k) v += Q[static_cast<std::size_t>(k)] * y[k] * y[k] + q[static_cast<std::size_t>(k)] * y[k];
        const VectorXd price = P - chi.cwiseProduct(A * z);
        v -= price.dot(Ai * y);
        v += w2 * y.sum() - w1 * y.sum() * y.sum();
        return v;
      };
      CHECK((b.game.cost_grad(i, x) - fd_gradient(J, x, off, len)).norm() <= 1e-6);
    }
  }
}

TEST_CASE("cournot monotonicity") {
  dgne::CournotOptions opt;
  opt.zero_price_slope = true;
  opt.zero_iso_charge = true;
  const auto b = dgne::build_cournot_market(1, opt);
  const auto c = dgne::estimate_bundle_constants(b, 100, 1);
  CHECK(c.constants.mu >= 16.0 - 1e-6);

  const auto full = dgne::build_cournot_market(1);
  const auto n = static_cast<Eigen::Index>(full.game.total_dim());
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int s = 0; s < 100; ++s) {
    VectorXd a(n), bb(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      a[k] = u(rng) * full.sample_upper[k];
      bb[k] = u(rng) * full.sample_upper[k];
    }
    CHECK((dgne::pseudo_gradient(full.game, a) - dgne::pseudo_gradient(full.game, bb)).dot(a - bb) > 0.0);
  }
}

TEST_CASE("scenario export is deterministic") {
  CHECK(dgne::to_json(dgne::build_cournot_market(4)).dump() == dgne::to_json(dgne::build_cournot_market(4)).dump());
  CHECK(dgne::to_json(dgne::build_sensor_network(4)).dump() == dgne::to_json(dgne::build_sensor_network(4)).dump());
  CHECK(dgne::to_json(dgne::build_sensor_network(4)).dump() != dgne::to_json(dgne::build_sensor_network(5)).dump());
  CHECK(dgne::build_scenario("el-fleet", 0).name == "el-fleet");
  CHECK_THROWS_AS(dgne::build_scenario("traffic", 0), dgne::Error);
}
