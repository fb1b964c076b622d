#include "doctest.h"

#include <cmath>
#include <sstream>
#include <string>

#include "dgne/dynamics.hpp"
#include "dgne/error.hpp"

using Eigen::VectorXd;

namespace {

/// x' = a x on a chosen set; kkt metric |x|.
class LinearFlow : public dgne::FlowSystem {
 public:
  LinearFlow(double a, dgne::ConvexSet set) : a_(a), set_(std::move(set)) {}
  std::size_t dimension() const override { return set_.dim(); }
  const dgne::ConvexSet& admissible_set() const override { return set_; }
  VectorXd raw_field(const VectorXd& s) const override { return a_ * s; }
  dgne::MetricRecord metrics(const VectorXd& s) const override {
    dgne::MetricRecord r;
    r.kkt_residual = s.norm();
    return r;
  }

 private:
  double a_;
  dgne::ConvexSet set_;
};

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("projected euler step examples") {
  const auto unit = dgne::ConvexSet::box(VectorXd::Zero(1), VectorXd::Ones(1));
  const dgne::RawField minus_one = [](const VectorXd&) { return scalar(-1.0); };
  CHECK(dgne::step(minus_one, unit, scalar(0.3), 0.1)[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(dgne::step(minus_one, unit, scalar(0.05), 0.1)[0] == 0.0);

  const auto orthant = dgne::ConvexSet::orthant(2);
  const dgne::RawField down = [](const VectorXd&) { return VectorXd::Constant(2, -3.0); };
  const VectorXd lam = dgne::step(down, orthant, Eigen::Vector2d(0.0, 1.0), 0.1);
  CHECK(lam[0] == 0.0);
  CHECK(lam[1] == doctest::Approx(0.7));
}

TEST_CASE("interior steps follow the field to second order") {
  const auto ball = dgne::ConvexSet::ball(Eigen::Vector2d::Zero(), 10.0);
  const dgne::RawField rot = [](const VectorXd& s) { return Eigen::Vector2d(-s[1], s[0] * s[0]).eval(); };
  const Eigen::Vector2d s0(0.5, -0.4);
  for (double h : {1e-2, 1e-3}) {
    const VectorXd exact_first_order = s0 + h * rot(s0);
    CHECK((dgne::step(rot, ball, s0, h) - exact_first_order).norm() <= h * h);
  }
}

TEST_CASE("step rejects states outside the set") {
  const auto unit = dgne::ConvexSet::box(VectorXd::Zero(1), VectorXd::Ones(1));
  const dgne::RawField f = [](const VectorXd&) { return scalar(0.0); };
  try {
    dgne::step(f, unit, scalar(2.0), 0.1);
    FAIL("expected an error");
  } catch (const dgne::Error& e) {
    CHECK(e.kind() == dgne::ErrorKind::NotInSet);
  }
}

TEST_CASE("exponential decay") {
  LinearFlow flow(-2.0, dgne::ConvexSet::full_space(1));
  dgne::IntegratorConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 10.0;
  cfg.tol = 0.0;
  const auto traj = dgne::integrate(flow, scalar(1.0), cfg);
  CHECK(std::abs(traj.final_state[0]) <= 1e-8);
  CHECK(traj.steps == 1000);
  CHECK(traj.final_state[0] == doctest::Approx(std::pow(0.98, 1000)).epsilon(1e-10));
}

TEST_CASE("record layout and convergence detection") {
  LinearFlow flow(-1.0, dgne::ConvexSet::full_space(1));
  dgne::IntegratorConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 1.234;
  cfg.tol = 0.0;
  cfg.stride = 10;
  const auto traj = dgne::integrate(flow, scalar(1.0), cfg);
  CHECK(traj.steps == 124);
  CHECK(traj.metrics.size() == (traj.steps + cfg.stride - 1) / cfg.stride + 1);
  CHECK(traj.snapshots.size() == traj.times.size());
  for (std::size_t r = 1; r < traj.times.size(); ++r) CHECK(traj.times[r] > traj.times[r - 1]);

  cfg.horizon = 100.0;
  cfg.tol = 1e-3;
  cfg.stride = 1;
  const auto conv = dgne::integrate(flow, scalar(1.0), cfg);
  CHECK(conv.converged);
  CHECK(conv.steps < 10000);
  // Ten sustained records below tol, the first of them is the first crossing.
  const double first = std::log(1e-3) / std::log(0.99);
  CHECK(conv.steps == static_cast<std::size_t>(std::ceil(first)) + cfg.sustain - 1);
}

TEST_CASE("integration is deterministic") {
  LinearFlow flow(-0.7, dgne::ConvexSet::box(Eigen::Vector2d(-1, 0), Eigen::Vector2d(1, 1)));
  dgne::IntegratorConfig cfg;
  cfg.step = 0.003;
  cfg.horizon = 2.0;
  const auto a = dgne::integrate(flow, Eigen::Vector2d(0.3, 0.9), cfg);
  const auto b = dgne::integrate(flow, Eigen::Vector2d(0.3, 0.9), cfg);
  REQUIRE(a.snapshots.size() == b.snapshots.size());
  for (std::size_t r = 0; r < a.snapshots.size(); ++r) CHECK(a.snapshots[r] == b.snapshots[r]);
}

TEST_CASE("divergence guard carries the partial trajectory") {
  LinearFlow flow(5.0, dgne::ConvexSet::full_space(1));
  dgne::IntegratorConfig cfg;
  cfg.step = 1.0;
  cfg.horizon = 1000.0;
  try {
    dgne::integrate(flow, scalar(1.0), cfg);
    FAIL("expected divergence");
  } catch (const dgne::DivergenceError& e) {
    CHECK(e.kind() == dgne::ErrorKind::Divergence);
    CHECK(!e.partial().metrics.empty());
    CHECK(e.partial().final_state.allFinite());
    CHECK(std::abs(e.partial().final_state[0]) <= 1e12);
  }
}

TEST_CASE("equilibrium start stays put") {
  LinearFlow flow(-1.0, dgne::ConvexSet::orthant(2));
  dgne::IntegratorConfig cfg;
  cfg.horizon = 1.0;
  cfg.tol = 0.0;
  const auto traj = dgne::integrate(flow, Eigen::Vector2d::Zero(), cfg);
  for (const auto& s : traj.snapshots) CHECK(s.norm() <= 1e-10);
}

TEST_CASE("invalid integrator configs") {
  dgne::IntegratorConfig c;
  c.step = 0.0;
  CHECK_THROWS_AS(c.validate(), dgne::Error);
  c = {};
  c.stride = 0;
  CHECK_THROWS_AS(c.validate(), dgne::Error);
  c = {};
  c.step = 20.0;
  CHECK_THROWS_AS(c.validate(), dgne::Error);
}

TEST_CASE("csv export") {
  LinearFlow flow(-1.0, dgne::ConvexSet::full_space(2));
  dgne::IntegratorConfig cfg;
  cfg.step = 0.1;
  cfg.horizon = 1.0;
  cfg.tol = 0.0;
  cfg.stride = 3;
  const auto traj = dgne::integrate(flow, Eigen::Vector2d(1, 2), cfg);
  std::ostringstream os;
  dgne::write_trajectory_csv(os, traj, {1}, {"s1"});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "# dgne-trajectory v1");
  std::getline(is, line);
  CHECK(line.rfind("t,kkt_residual", 0) == 0);
  CHECK(line.find("s1") != std::string::npos);
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 10 / 3 + 1 + 1);
  const auto j = dgne::trajectory_summary(traj);
  CHECK(j.at("steps").get<std::size_t>() == 10);
}
