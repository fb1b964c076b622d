#include "dgne/scenarios.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "dgne/error.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

std::vector<double> as_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

const Eigen::Vector2d kBaseStation(0.0, 0.3);

}  // namespace

BundleConstants estimate_bundle_constants(const ScenarioBundle& bundle, std::size_t samples, std::uint64_t seed) {
  SamplerConfig s;
  s.count = samples;
  s.lower = bundle.sample_lower;
  s.upper = bundle.sample_upper;
  s.seed = seed;
  BundleConstants out;
  out.lambda2 = algebraic_connectivity(bundle.graph);
  if (!(out.lambda2 > 0.0)) throw Error(ErrorKind::Disconnected, "communication graph is not connected");
  out.constants = bundle.aggregative ? estimate_aggregative_constants(*bundle.aggregative, s)
                                     : estimate_game_constants(bundle.game, s);
  out.c_bar = min_constant_gain(out.constants, out.lambda2);
  out.k_bar = min_adaptive_gain(out.constants, out.lambda2);
  if (out.constants.theta_sigma) {
    out.c_bar_aggregative = min_gain_aggregative(out.constants, out.lambda2, false);
    out.k_bar_aggregative = min_gain_aggregative(out.constants, out.lambda2, true);
  }
  return out;
}

// ---------------------------------------------------------------------------

ScenarioBundle build_sensor_network(std::uint64_t seed, const SensorNetworkOptions& options) {
  const std::size_t N = options.num_agents;
  if (N < 2) throw Error(ErrorKind::InvalidArgument, "sensor network needs at least two agents");
  std::mt19937_64 rng(seed);

  ScenarioBundle b;
  b.name = "sensor";
  b.seed = seed;
  b.graph = CommGraph::random_connected(N, options.edge_probability, seed + 1);

  std::vector<Eigen::Vector2d> d(N);
  for (auto& di : d) di = Eigen::Vector2d(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));

  GameSpec& g = b.game;
  g.dims.assign(N, 2);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i) {
    g.local_sets.push_back(ConvexSet::box(Eigen::Vector2d(-inf, 0.1), Eigen::Vector2d(inf, 0.5)));
  }
  g.cost_grad = [d, N](std::size_t i, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::Vector2d xi = x.segment<2>(idx(2 * i));
    Eigen::Vector2d grad = 2.0 * xi + d[i] + Eigen::Vector2d(std::cos(xi[0]), 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      if (j != i) grad += 2.0 * (xi - x.segment<2>(idx(2 * j)));
    }
    return grad;
  };

  // Chebyshev rows per edge: +-(p_i - p_j) <= 1/5 in both coordinates, split
  // as +-p_i - 1/10 for agent i and -+p_j - 1/10 for agent j.
  const auto& edges = b.graph.edges();
  const std::size_t m = 4 * edges.size() + 1;
  g.coupling_dim = m;
  std::vector<Eigen::MatrixXd> A(N, Eigen::MatrixXd::Zero(idx(m), 2));
  std::vector<Eigen::VectorXd> c(N, Eigen::VectorXd::Zero(idx(m)));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto r = idx(4 * e);
    for (int coord = 0; coord < 2; ++coord) {
      for (int sign = 0; sign < 2; ++sign) {
        const auto row = r + 2 * coord + sign;
        const double s = sign == 0 ? 1.0 : -1.0;
        A[edges[e].i](row, coord) = s;
        A[edges[e].j](row, coord) = -s;
        c[edges[e].i][row] = -0.1;
        c[edges[e].j][row] = -0.1;
      }
    }
  }
  const double Nd = static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) {
    AgentConstraint ci;
    const Eigen::MatrixXd Ai = A[i];
    const Eigen::VectorXd ci0 = c[i];
    ci.value = [Ai, ci0, Nd, m](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
      Eigen::VectorXd v = Ai * xi + ci0;
      v[idx(m - 1)] = (xi - kBaseStation).squaredNorm() / Nd - 0.5 / Nd;
      return v;
    };
    ci.jacobian = [Ai, Nd, m](const Eigen::VectorXd& xi) -> Eigen::MatrixXd {
      Eigen::MatrixXd J = Ai;
      J.row(idx(m - 1)) = 2.0 * (xi - kBaseStation).transpose() / Nd;
      return J;
    };
    g.coupling.push_back(std::move(ci));
  }
  g.validate();

  b.initial_actions.resize(idx(2 * N));
  for (std::size_t i = 0; i < N; ++i) {
    b.initial_actions[idx(2 * i)] = uniform(rng, -1.0, 1.0);
    b.initial_actions[idx(2 * i + 1)] = uniform(rng, 0.1, 0.5);
  }
  b.sample_lower = Eigen::VectorXd(idx(2 * N));
  b.sample_upper = Eigen::VectorXd(idx(2 * N));
  for (std::size_t i = 0; i < N; ++i) {
    b.sample_lower.segment<2>(idx(2 * i)) = Eigen::Vector2d(-1.0, 0.1);
    b.sample_upper.segment<2>(idx(2 * i)) = Eigen::Vector2d(1.0, 0.5);
  }

  nlohmann::json dj = nlohmann::json::array();
  for (const auto& di : d) dj.push_back({di[0], di[1]});
  b.parameters = {{"d", dj},
                  {"base_station", {kBaseStation[0], kBaseStation[1]}},
                  {"chebyshev_bound", 0.2},
                  {"distance_budget", 0.5},
                  {"y_bounds", {0.1, 0.5}}};
  return b;
}

// ---------------------------------------------------------------------------

Eigen::Matrix2d EulerLagrangeModel::inertia(const Eigen::Vector2d& x) const {
  const double cy = std::cos(x[1]);
  Eigen::Matrix2d I;
  I << 2.0 + 0.6 * cy, 0.5 + 0.3 * cy, 0.5 + 0.3 * cy, 0.5;
  return I;
}

Eigen::Matrix2d EulerLagrangeModel::coriolis(const Eigen::Vector2d& x, const Eigen::Vector2d& xd) const {
  const double sy = std::sin(x[1]);
  Eigen::Matrix2d C;
  C << -0.3 * sy * xd[1], -0.3 * sy * (xd[0] + xd[1]), 0.3 * sy * xd[0], 0.0;
  return C;
}

Eigen::Vector2d EulerLagrangeModel::acceleration(const Eigen::Vector2d& x, const Eigen::Vector2d& xd,
                                                 const Eigen::Vector2d& u) const {
  const Eigen::Matrix2d I = inertia(x);
  if (!(std::abs(I.determinant()) > 1e-12)) throw Error(ErrorKind::InvalidArgument, "singular inertia matrix");
  return I.ldlt().solve(u - coriolis(x, xd) * xd - gravity());
}

Eigen::Vector2d feedback_linearize_el(const EulerLagrangeModel& model, const Eigen::Vector2d& x,
                                      const Eigen::Vector2d& xd, const Eigen::Vector2d& a) {
  return model.inertia(x) * a + model.coriolis(x, xd) * xd + model.gravity();
}

ScenarioBundle build_euler_lagrange_fleet(std::uint64_t seed, const SensorNetworkOptions& options) {
  ScenarioBundle b = build_sensor_network(seed, options);
  b.name = "el-fleet";
  b.game = dualize_box_sets(b.game);
  b.orders.assign(b.game.num_agents(), std::vector<int>(2, 2));
  const EulerLagrangeModel model;
  b.plant = [model](std::size_t, const Eigen::VectorXd& x, const Eigen::VectorXd& xd,
                    const Eigen::VectorXd& a) -> Eigen::VectorXd {
    const Eigen::Vector2d u = feedback_linearize_el(model, x, xd, a);
    return model.acceleration(x, xd, u);
  };
  b.parameters["orders"] = b.orders;
  b.parameters["gravity"] = {0.0, -1.0};
  return b;
}

// ---------------------------------------------------------------------------

void TurbineParams::validate() const {
  if (!(alpha1 > 0.0 && alpha2 > 0.0 && alpha3 > 0.0 && alpha4 > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "turbine parameters must be positive");
  }
}

double feedback_linearize_turbine(const TurbineParams& p, double P, double R, double a) {
  if (!(p.alpha2 > 0.0) || !(p.alpha4 > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "turbine input gains must be positive");
  }
  const double Pdot = -p.alpha1 * P + p.alpha2 * R;
  return (a + (p.alpha1 + p.alpha3) * Pdot + p.alpha1 * p.alpha3 * P) / (p.alpha2 * p.alpha4);
}

double turbine_power_acceleration(const TurbineParams& p, double P, double R, double u) {
  const double Pdot = -p.alpha1 * P + p.alpha2 * R;
  const double Rdot = -p.alpha3 * R + p.alpha4 * u;
  return -p.alpha1 * Pdot + p.alpha2 * Rdot;
}

ScenarioBundle build_cournot_market(std::uint64_t seed, const CournotOptions& opt) {
  const std::size_t N = opt.num_firms;
  const std::size_t m = opt.num_markets;
  if (N < 1 || m < 1) throw Error(ErrorKind::InvalidArgument, "Cournot market needs at least one firm and market");
  opt.turbine.validate();
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution join(opt.participation);

  // participation[i] lists the markets firm i serves.
  std::vector<std::vector<std::size_t>> part(N);
  for (int attempt = 0;; ++attempt) {
    if (attempt > 100000) throw Error(ErrorKind::InvalidArgument, "could not sample a participation pattern");
    std::vector<std::size_t> per_market(m, 0);
    bool ok = true;
    for (std::size_t i = 0; i < N; ++i) {
      part[i].clear();
      for (std::size_t j = 0; j < m; ++j) {
        if (join(rng)) {
          part[i].push_back(j);
          ++per_market[j];
        }
      }
      ok = ok && !part[i].empty();
    }
    for (auto c : per_market) ok = ok && c > 0;
    if (ok) break;
  }

  std::vector<double> X(N), C(N);
  std::vector<Eigen::VectorXd> Q(N), q(N);
  Eigen::VectorXd r(idx(m)), P(idx(m)), chi(idx(m));
  for (std::size_t i = 0; i < N; ++i) {
    X[i] = uniform(rng, 0.3, 1.3);
    C[i] = uniform(rng, 1.0, 2.0);
  }
  for (std::size_t j = 0; j < m; ++j) r[idx(j)] = uniform(rng, 1.0, 2.0);
  for (std::size_t i = 0; i < N; ++i) {
    const auto ni = idx(part[i].size());
    Q[i].resize(ni);
    q[i].resize(ni);
    for (Eigen::Index k = 0; k < ni; ++k) Q[i][k] = uniform(rng, 8.0, 16.0);
    for (Eigen::Index k = 0; k < ni; ++k) q[i][k] = uniform(rng, 1.0, 2.0);
  }
  for (std::size_t j = 0; j < m; ++j) P[idx(j)] = uniform(rng, 10.0, 20.0);
  for (std::size_t j = 0; j < m; ++j) chi[idx(j)] = uniform(rng, 1.0, 3.0);
  double w1 = uniform(rng, 0.5, 1.0);
  double w2 = uniform(rng, 0.0, 0.1);
  if (opt.zero_price_slope) chi.setZero();
  if (opt.zero_iso_charge) w1 = w2 = 0.0;

  ScenarioBundle b;
  b.name = "cournot";
  b.seed = seed;
  b.graph = CommGraph::random_connected(N, opt.edge_probability, seed + 1);

  AggregativeGameSpec agg;
  const double Nd = static_cast<double>(N);
  agg.agg_dim = m;
  agg.coupling_dim = m;
  for (std::size_t i = 0; i < N; ++i) {
    const auto ni = idx(part[i].size());
    Eigen::MatrixXd Ai = Eigen::MatrixXd::Zero(idx(m), ni);
    for (Eigen::Index k = 0; k < ni; ++k) Ai(idx(part[i][static_cast<std::size_t>(k)]), k) = 1.0;
    agg.dims.push_back(part[i].size());
    agg.local_sets.push_back(ConvexSet::box(Eigen::VectorXd::Zero(ni), Eigen::VectorXd::Constant(ni, X[i])));
    agg.B.push_back(Ai);
    agg.d.push_back(Eigen::VectorXd::Zero(idx(m)));
    agg.coupling.push_back(affine_constraint(Ai, r / Nd));
    agg.local_rows.push_back(1);
    agg.locals.push_back(affine_constraint(Eigen::RowVectorXd::Ones(ni), Eigen::VectorXd::Constant(1, C[i])));
  }
  const std::vector<Eigen::MatrixXd> A = agg.B;
  // f_i(y, s) = sum Q y^2 + q y - (P - N chi.s)' A_i y + w2 1'y - w1 (1'y)^2
  agg.f_grad_x = [A, Q, q, P, chi, w1, w2, Nd](std::size_t i, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& s) -> Eigen::VectorXd {
    const double total = y.sum();
    Eigen::VectorXd gr = 2.0 * Q[i].cwiseProduct(y) + q[i] - A[i].transpose() * (P - Nd * chi.cwiseProduct(s));
    gr.array() += w2 - 2.0 * w1 * total;
    return gr;
  };
  agg.f_grad_sigma = [A, chi, Nd](std::size_t i, const Eigen::VectorXd& y, const Eigen::VectorXd&) -> Eigen::VectorXd {
    return Nd * chi.cwiseProduct(A[i] * y);
  };
  agg.validate();
  agg.validate_aggregation();

  b.aggregative = agg;
  b.game = to_general_game(agg);
  const std::size_t n = agg.total_dim();
  b.orders.resize(N);
  for (std::size_t i = 0; i < N; ++i) b.orders[i].assign(agg.dims[i], 2);
  const TurbineParams tp = opt.turbine;
  b.plant = [tp](std::size_t, const Eigen::VectorXd& x, const Eigen::VectorXd& xd,
                 const Eigen::VectorXd& a) -> Eigen::VectorXd {
    Eigen::VectorXd out(a.size());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double R = (xd[k] + tp.alpha1 * x[k]) / tp.alpha2;
      out[k] = turbine_power_acceleration(tp, x[k], R, feedback_linearize_turbine(tp, x[k], R, a[k]));
    }
    return out;
  };

  b.initial_actions.resize(idx(n));
  b.sample_lower = Eigen::VectorXd::Zero(idx(n));
  b.sample_upper.resize(idx(n));
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t k = 0; k < agg.dims[i]; ++k) {
      b.initial_actions[idx(agg.offset(i) + k)] = uniform(rng, 0.0, X[i]);
      b.sample_upper[idx(agg.offset(i) + k)] = X[i];
    }
  }

  nlohmann::json firms = nlohmann::json::array();
  for (std::size_t i = 0; i < N; ++i) {
    firms.push_back({{"markets", part[i]},
                     {"capacity", X[i]},
                     {"share_cap", C[i]},
                     {"Q", as_vector(Q[i])},
                     {"q", as_vector(q[i])}});
  }
  b.parameters = {{"firms", firms},       {"market_capacity", as_vector(r)},
                  {"P", as_vector(P)},    {"chi", as_vector(chi)},
                  {"w1", w1},             {"w2", w2},
                  {"aggregation", "A x / N"},
                  {"turbine", {tp.alpha1, tp.alpha2, tp.alpha3, tp.alpha4}}};

  try {
    SamplerConfig s;
    s.count = 100;
    s.lower = b.sample_lower;
    s.upper = b.sample_upper;
    s.seed = seed;
    estimate_game_constants(b.game, s);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AssumptionViolation) throw;
    throw Error(ErrorKind::AssumptionViolation,
                "sampled Cournot game is not strongly monotone; try another seed", e.value());
  }
  return b;
}

Eigen::MatrixXd cournot_market_matrix(const ScenarioBundle& bundle) {
  if (!bundle.aggregative) throw Error(ErrorKind::InvalidArgument, "bundle has no aggregative structure");
  const auto& agg = *bundle.aggregative;
  Eigen::MatrixXd A(idx(agg.agg_dim), idx(agg.total_dim()));
  for (std::size_t i = 0; i < agg.num_agents(); ++i) A.middleCols(idx(agg.offset(i)), idx(agg.dims[i])) = agg.B[i];
  return A;
}

nlohmann::json to_json(const ScenarioBundle& b) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& s : b.game.local_sets) sets.push_back(to_json(s));
  return {{"scenario", b.name},
          {"seed", b.seed},
          {"num_agents", b.game.num_agents()},
          {"dims", b.game.dims},
          {"coupling_dim", b.game.coupling_dim},
          {"local_rows", b.game.local_rows},
          {"local_sets", sets},
          {"graph", to_json(b.graph)},
          {"orders", b.orders},
          {"initial_actions", as_vector(b.initial_actions)},
          {"parameters", b.parameters}};
}

ScenarioBundle build_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "sensor") return build_sensor_network(seed);
  if (name == "el-fleet") return build_euler_lagrange_fleet(seed);
  if (name == "cournot") return build_cournot_market(seed);
  throw Error(ErrorKind::Config, "unknown scenario '" + name + "'");
}

}  // namespace dgne
