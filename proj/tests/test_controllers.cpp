#include "doctest.h"

#include <cmath>
#include <random>

#include "dgne/controllers.hpp"
#include "dgne/error.hpp"
#include "dgne/multi_integrator.hpp"
#include "dgne/reference.hpp"
#include "support.hpp"

using dgne::CommGraph;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Three scalar agents, sum x_i <= 1 is active at the solution.
dgne::GameSpec coupled_game() {
  MatrixXd M(3, 3);
  M << 2, 0.5, 0, -0.5, 2, 0.3, 0, -0.3, 2;
  return testing::affine_game({1, 1, 1}, M, VectorXd::Constant(3, -2.0), {}, MatrixXd::Ones(1, 3),
                              VectorXd::Constant(1, 1.0));
}

CommGraph path3() { return CommGraph::path(3); }

// f_i(y, s) = a y^2 / 2 + b y s + q y, psi_i = y, optional sum x_i <= 1.
dgne::AggregativeGameSpec scalar_aggregative(std::size_t N, bool coupled) {
  dgne::AggregativeGameSpec agg;
  agg.dims.assign(N, 1);
  for (std::size_t i = 0; i < N; ++i) agg.local_sets.push_back(dgne::ConvexSet::full_space(1));
  agg.agg_dim = 1;
  agg.B.assign(N, MatrixXd::Identity(1, 1));
  agg.d.assign(N, VectorXd::Zero(1));
  const double a = 3.0, b = 1.0, q = -2.0;
  agg.f_grad_x = [=](std::size_t, const VectorXd& y, const VectorXd& s) -> VectorXd {
    return VectorXd::Constant(1, a * y[0] + b * s[0] + q);
  };
  agg.f_grad_sigma = [=](std::size_t, const VectorXd& y, const VectorXd&) -> VectorXd {
    return VectorXd::Constant(1, b * y[0]);
  };
  if (coupled) {
    agg.coupling_dim = 1;
    for (std::size_t i = 0; i < N; ++i)
      agg.coupling.push_back(dgne::affine_constraint(MatrixXd::Ones(1, 1), VectorXd::Constant(1, 1.0 / double(N))));
  }
  return agg;
}

VectorXd z_bar(const dgne::GameStructure& game, const VectorXd& x) {
  const std::size_t N = game.num_agents(), m = game.coupling_dim;
  const VectorXd g = dgne::coupling_value(game, x);
  VectorXd z(static_cast<Eigen::Index>(N * m));
  for (std::size_t i = 0; i < N; ++i)
    z.segment(static_cast<Eigen::Index>(i * m), static_cast<Eigen::Index>(m)) =
        dgne::agent_coupling_value(game, i, game.block(x, i)) - g / double(N);
  return z;
}

dgne::EstimateStackState fixture_state(const dgne::GameSpec& game, const dgne::KktPoint& p, std::size_t N) {
  dgne::EstimateStackState s;
  s.xstack = dgne::replicate(N, p.x);
  s.z = z_bar(game, p.x);
  s.lambda = dgne::replicate(N, p.lambda);
  s.k = VectorXd::Constant(static_cast<Eigen::Index>(N), 2.0);
  return s;
}

}  // namespace

TEST_CASE("single agent field is the negative gradient") {
  // J = x^2 at x = 1.
  const auto game = testing::affine_game({1}, MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1));
  dgne::EstimateStackState s;
  s.xstack = VectorXd::Constant(1, 1.0);
  const VectorXd f = dgne::field_alg1(game, CommGraph(1, {}), 1.0, s);
  REQUIRE(f.size() == 1);
  CHECK(f[0] == doctest::Approx(-2.0));
}

TEST_CASE("z update is the laplacian of the multipliers") {
  const auto game = testing::affine_game({1, 1}, MatrixXd::Identity(2, 2) * 2, VectorXd::Zero(2), {},
                                         MatrixXd::Ones(1, 2), VectorXd::Zero(1));
  const dgne::EstimateStackController ctl(game, CommGraph(2, {{0, 1}}), 1.0);
  dgne::EstimateStackState s;
  s.xstack = VectorXd::Zero(4);
  s.z = VectorXd::Zero(2);
  s.lambda = Eigen::Vector2d(1, 2);
  const VectorXd f = ctl.field(ctl.pack(s));
  CHECK(dgne::Controller::slice(f, ctl.z_segment()).isApprox(Eigen::Vector2d(-1, 1)));
}

TEST_CASE("equilibrium is a zero of the estimate-stack fields") {
  const auto game = coupled_game();
  const auto p = dgne::solve_reference_vgne(game, 1e-12);
  REQUIRE(p.lambda[0] > 1e-3);
  const auto s = fixture_state(game, p, 3);
  CHECK(dgne::field_alg1(game, path3(), 5.0, s).norm() <= 1e-8);
  CHECK(dgne::field_alg2(game, path3(), VectorXd::Ones(3), s).norm() <= 1e-8);
}

TEST_CASE("adaptive field on consensus has no gain growth and matches the constant one") {
  const auto game = coupled_game();
  std::mt19937_64 rng(3);
  dgne::EstimateStackState s;
  s.xstack = dgne::replicate(3, testing::random_vector(3, rng));
  s.z = testing::random_vector(3, rng);
  s.lambda = testing::random_vector(3, rng).cwiseAbs();
  s.k = VectorXd::Constant(3, 4.0);
  const dgne::EstimateStackController c1(game, path3(), 7.0);
  const dgne::EstimateStackController c2(game, path3(), VectorXd::Ones(3));
  const VectorXd f1 = c1.field(c1.pack(s));
  const VectorXd f2 = c2.field(c2.pack(s));
  CHECK(dgne::Controller::slice(f2, c2.gain_segment()).norm() == 0.0);
  CHECK((f2.head(9) - f1.head(9)).norm() <= 1e-14);
  CHECK((dgne::Controller::slice(f2, c2.lambda_segment()) - dgne::Controller::slice(f1, c1.lambda_segment())).norm() <=
        1e-14);
}

TEST_CASE("adaptive consensus term matches the dense product") {
  const auto game = coupled_game();
  const auto g = CommGraph::random_connected(3, 0.5, 4);
  const dgne::EstimateStackController ctl(game, g, VectorXd::Ones(3));
  std::mt19937_64 rng(5);
  const VectorXd x = testing::random_vector(9, rng);
  const VectorXd k = testing::random_vector(3, rng).cwiseAbs();
  const MatrixXd L = testing::dense_kron_laplacian(g, 3);
  MatrixXd K = MatrixXd::Zero(9, 9);
  for (int i = 0; i < 3; ++i) K.block(3 * i, 3 * i, 3, 3) = k[i] * MatrixXd::Identity(3, 3);
  CHECK((ctl.consensus_term(x, k) + L * K * L * x).norm() <= 1e-12);
  const dgne::EstimateStackController c1(game, g, 2.5);
  CHECK((c1.consensus_term(x, k) + 2.5 * L * x).norm() <= 1e-12);
}

TEST_CASE("aggregative tracking dynamics") {
  const auto agg = scalar_aggregative(4, false);
  const auto g = CommGraph::path(4);
  const dgne::AggregativeController ctl(agg, g, 3.0);
  std::mt19937_64 rng(9);
  dgne::AggregativeState s;
  s.x = testing::random_vector(4, rng);
  // sigma^i = 0.7 for every agent.
  s.varsigma = VectorXd::Constant(4, 0.7) - s.x;
  const VectorXd f = ctl.field(ctl.pack(s));
  CHECK(dgne::Controller::slice(f, ctl.varsigma_segment()).norm() <= 1e-15);
  CHECK(ctl.consensus_error(ctl.pack(s)) <= 1e-15);

  s.varsigma = testing::random_vector(4, rng);
  const VectorXd f2 = ctl.field(ctl.pack(s));
  CHECK(std::abs(dgne::Controller::slice(f2, ctl.varsigma_segment()).sum()) <= 1e-14);
}

TEST_CASE("adaptive aggregative feedback matches the dense product") {
  const auto agg = scalar_aggregative(4, false);
  const auto g = CommGraph::random_connected(4, 0.5, 1);
  std::mt19937_64 rng(10);
  dgne::AggregativeState s;
  s.x = testing::random_vector(4, rng);
  s.varsigma = testing::random_vector(4, rng);
  s.k = testing::random_vector(4, rng).cwiseAbs();
  const dgne::AggregativeController ctl(agg, g, VectorXd::Ones(4));
  const VectorXd f = ctl.field(ctl.pack(s));
  auto s0 = s;
  s0.k.setZero();
  const VectorXd f0 = ctl.field(ctl.pack(s0));
  const MatrixXd L = testing::dense_kron_laplacian(g, 1);
  const VectorXd sigma = s.x + s.varsigma;
  const VectorXd w = L * s.k.asDiagonal() * L * sigma;
  CHECK((f.head(4) - f0.head(4) + w).norm() <= 1e-12);
  CHECK((dgne::Controller::slice(f, ctl.varsigma_segment()) + w).norm() <= 1e-12);
  const VectorXd rho = L * sigma;
  CHECK((dgne::Controller::slice(f, ctl.gain_segment()) - rho.cwiseAbs2()).norm() <= 1e-12);
}

TEST_CASE("aggregative equilibrium is a zero of the fields") {
  const auto agg = scalar_aggregative(3, true);
  const auto general = dgne::to_general_game(agg);
  const auto p = dgne::solve_reference_vgne(general, 1e-12);
  REQUIRE(p.lambda[0] > 1e-3);
  dgne::AggregativeState s;
  s.x = p.x;
  s.varsigma = VectorXd::Constant(3, p.x.mean()) - p.x;
  s.z = z_bar(agg, p.x);
  s.lambda = dgne::replicate(3, p.lambda);
  s.k = VectorXd::Ones(3);
  CHECK(dgne::field_alg3(agg, path3(), 2.0, s).norm() <= 1e-8);
  CHECK(dgne::field_alg4(agg, path3(), VectorXd::Ones(3), s).norm() <= 1e-8);
}

TEST_CASE("box sets become local multipliers") {
  auto game = testing::affine_game({1, 1}, MatrixXd::Identity(2, 2), VectorXd::Zero(2),
                                   {dgne::ConvexSet::box(VectorXd::Zero(1), VectorXd::Ones(1)),
                                    dgne::ConvexSet::full_space(1)});
  const auto d = dgne::dualize_locals(game);
  CHECK(d.local_sets[0].is_full_space());
  CHECK(d.local_rows[0] == 2);
  CHECK(d.local_rows[1] == 0);
  const VectorXd loc = dgne::local_constraint_stack(d, Eigen::Vector2d(2.0, 5.0));
  CHECK(loc.isApprox(Eigen::Vector2d(-2.0, 1.0)));
  const dgne::EstimateStackController ctl(d, CommGraph(2, {{0, 1}}), 1.0);
  CHECK(ctl.local_segment().size == 2);
}

TEST_CASE("integrator chain helpers") {
  CHECK(dgne::hurwitz_coeffs(2).isApprox(Eigen::Vector2d(1, 1)));
  CHECK(dgne::hurwitz_coeffs(3).isApprox(Eigen::Vector3d(1, 2, 1)));
  CHECK(dgne::hurwitz_coeffs(4).isApprox(Eigen::Vector4d(1, 3, 3, 1)));
  for (int r = 2; r <= 6; ++r) {
    const Eigen::VectorXcd ev = dgne::chain_companion_matrix(dgne::hurwitz_coeffs(r)).eigenvalues();
    CHECK(ev.real().maxCoeff() < 0.0);
  }
  const auto t = dgne::zeta_transform(Eigen::Vector2d(1, 2), dgne::hurwitz_coeffs(2));
  CHECK(t.zeta == doctest::Approx(3.0));
  CHECK(t.v.size() == 1);
  CHECK(dgne::physical_input(5.0, Eigen::Vector2d(1, 2), dgne::hurwitz_coeffs(2)) == doctest::Approx(3.0));
  // r = 3: zeta' = a + 2b + u must equal u~.
  const Eigen::Vector3d chain(0.4, -1.0, 0.5);
  const double u = dgne::physical_input(2.0, chain, dgne::hurwitz_coeffs(3));
  CHECK(chain[1] + 2 * chain[2] + u == doctest::Approx(2.0));
}

TEST_CASE("single integrators reproduce the adaptive controller") {
  const auto game = coupled_game();
  dgne::MultiIntegratorSpec spec;
  spec.orders = {{1}, {1}, {1}};
  const dgne::MultiIntegratorController mi(game, path3(), VectorXd::Ones(3), spec);
  const dgne::EstimateStackController a2(game, path3(), VectorXd::Ones(3));
  std::mt19937_64 rng(12);
  dgne::EstimateStackState s;
  s.xstack = testing::random_vector(9, rng);
  s.z = testing::random_vector(3, rng);
  s.lambda = testing::random_vector(3, rng).cwiseAbs();
  s.k = testing::random_vector(3, rng).cwiseAbs();
  const VectorXd st2 = a2.pack(s);

  VectorXd st5 = VectorXd::Zero(static_cast<Eigen::Index>(mi.dimension()));
  st5.head(3) = a2.actions(st2);
  st5.segment(static_cast<Eigen::Index>(mi.zeta_segment().offset), 9) = s.xstack;
  st5.segment(static_cast<Eigen::Index>(mi.z_segment().offset), 3) = s.z;
  st5.segment(static_cast<Eigen::Index>(mi.lambda_segment().offset), 3) = s.lambda;
  st5.segment(static_cast<Eigen::Index>(mi.gain_segment().offset), 3) = s.k;

  const VectorXd f2 = a2.field(st2);
  const VectorXd f5 = mi.field(st5);
  CHECK((dgne::Controller::slice(f5, mi.zeta_segment()) - f2.head(9)).norm() <= 1e-13);
  CHECK((f5.head(3) - a2.actions(f2)).norm() <= 1e-13);
  for (auto seg : {&dgne::Controller::z_segment, &dgne::Controller::lambda_segment, &dgne::Controller::gain_segment})
    CHECK((dgne::Controller::slice(f5, (mi.*seg)()) - dgne::Controller::slice(f2, (a2.*seg)())).norm() <= 1e-13);
}

TEST_CASE("multi-integrator equilibrium and mixed orders") {
  const auto game = coupled_game();
  const auto p = dgne::solve_reference_vgne(game, 1e-12);
  dgne::MultiIntegratorSpec spec;
  spec.orders = {{1}, {2}, {3}};
  const dgne::MultiIntegratorController mi(game, path3(), VectorXd::Ones(3), spec);
  CHECK(mi.order(2, 0) == 3);
  CHECK(mi.coefficients(2, 0).isApprox(Eigen::Vector3d(1, 2, 1)));

  VectorXd st = mi.initial_state(p.x);
  st.segment(static_cast<Eigen::Index>(mi.zeta_segment().offset), 9) = dgne::replicate(3, p.x);
  st.segment(static_cast<Eigen::Index>(mi.z_segment().offset), 3) = z_bar(game, p.x);
  st.segment(static_cast<Eigen::Index>(mi.lambda_segment().offset), 3) = dgne::replicate(3, p.lambda);
  st.segment(static_cast<Eigen::Index>(mi.gain_segment().offset), 3) = VectorXd::Ones(3);
  CHECK(mi.field(st).norm() <= 1e-8);
  CHECK((mi.zeta_from_chains(st) - mi.zeta_diagonal(st)).norm() <= 1e-15);

  // The own zeta blocks track the chains along a trajectory started at rest.
  dgne::IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 2.0;
  cfg.tol = 0.0;
  cfg.stride = 100;
  const auto traj = dgne::integrate(mi, mi.initial_state(VectorXd::Constant(3, 0.3)), cfg);
  for (const auto& snap : traj.snapshots) CHECK((mi.zeta_from_chains(snap) - mi.zeta_diagonal(snap)).norm() <= 1e-9);
}

TEST_CASE("multi-integrator rejects bounded action sets") {
  auto game = testing::affine_game({1, 1}, MatrixXd::Identity(2, 2), VectorXd::Zero(2),
                                   {dgne::ConvexSet::box(VectorXd::Zero(1), VectorXd::Ones(1)),
                                    dgne::ConvexSet::full_space(1)});
  dgne::MultiIntegratorSpec spec;
  spec.orders = {{2}, {2}};
  try {
    dgne::MultiIntegratorController mi(game, CommGraph(2, {{0, 1}}), VectorXd::Ones(2), spec);
    FAIL("expected an error");
  } catch (const dgne::Error& e) {
    CHECK(e.kind() == dgne::ErrorKind::AssumptionViolation);
  }
  CHECK_NOTHROW(dgne::MultiIntegratorController(dgne::dualize_locals(game), CommGraph(2, {{0, 1}}), VectorXd::Ones(2),
                                                spec));
}

TEST_CASE("disconnected graphs are rejected") {
  try {
    dgne::EstimateStackController ctl(coupled_game(), CommGraph(3, {{0, 1}}), 1.0);
    FAIL("expected an error");
  } catch (const dgne::Error& e) {
    CHECK(e.kind() == dgne::ErrorKind::Disconnected);
  }
  CHECK_THROWS_AS(dgne::EstimateStackController(coupled_game(), path3(), -1.0), dgne::Error);
}

TEST_CASE("invariants along trajectories") {
  const auto game = coupled_game();
  const auto p = dgne::solve_reference_vgne(game, 1e-12);
  dgne::EstimateStackController ctl(game, path3(), VectorXd::Ones(3));
  dgne::EquilibriumFixture fx{p.x, p.lambda, VectorXd(), VectorXd::Constant(3, 20.0)};
  ctl.set_equilibrium(fx);
  auto fs = fixture_state(game, p, 3);
  fs.k = fx.k_bar;
  CHECK(*ctl.lyapunov(ctl.pack(fs)) <= 1e-20);

  dgne::IntegratorConfig cfg;
  cfg.step = 1e-3;
  cfg.horizon = 5.0;
  cfg.tol = 0.0;
  cfg.stride = 50;
  const auto traj = dgne::integrate(ctl, ctl.initial_state(Eigen::Vector3d(1, -1, 2)), cfg);
  double prev_k = 0.0;
  for (std::size_t r = 0; r < traj.snapshots.size(); ++r) {
    const auto& snap = traj.snapshots[r];
    CHECK(std::abs(ctl.z_stack(snap).sum()) <= 1e-12);
    CHECK(ctl.lambda_stack(snap).minCoeff() >= 0.0);
    CHECK(ctl.gains(snap).sum() >= prev_k);
    prev_k = ctl.gains(snap).sum();
    CHECK(traj.metrics[r].lyapunov.has_value());
  }
  CHECK(*traj.metrics.back().lyapunov < *traj.metrics.front().lyapunov);

  const auto agg = scalar_aggregative(3, true);
  const dgne::AggregativeController actl(agg, path3(), 2.0);
  const auto at = dgne::integrate(actl, actl.initial_state(Eigen::Vector3d(0.5, 0, -1)), cfg);
  for (const auto& snap : at.snapshots) {
    CHECK(std::abs(dgne::Controller::slice(snap, actl.varsigma_segment()).sum()) <= 1e-12);
    CHECK(std::abs(actl.sigma(snap).mean() - dgne::aggregate(agg, actl.actions(snap))[0]) <= 1e-12);
  }
}
