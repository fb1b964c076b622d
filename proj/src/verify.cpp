#include "dgne/verify.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <random>
#include <sstream>

#include "dgne/error.hpp"
#include "dgne/graph.hpp"
#include "dgne/multi_integrator.hpp"

namespace dgne {

namespace {

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

Eigen::VectorXd default_gamma(const Eigen::VectorXd& gamma, std::size_t N) {
  if (gamma.size() == 0) return Eigen::VectorXd::Ones(idx(N));
  if (gamma.size() == 1) return Eigen::VectorXd::Constant(idx(N), gamma[0]);
  return gamma;
}

nlohmann::json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd uniform_around(const Eigen::VectorXd& center, double r, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-r, r);
  Eigen::VectorXd out = center;
  for (Eigen::Index k = 0; k < out.size(); ++k) out[k] += u(rng);
  return out;
}

double lambda_min(const Eigen::Matrix2d& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(M);
  return es.eigenvalues().minCoeff();
}

/// R' v: places agent i's block of v at its own position inside x^i.
Eigen::VectorXd own_block_embed(const GameStructure& game, const Eigen::VectorXd& v) {
  const std::size_t N = game.num_agents();
  const std::size_t n = game.total_dim();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(idx(N * n));
  for (std::size_t i = 0; i < N; ++i) {
    out.segment(idx(i * n + game.offset(i)), idx(game.dims[i])) = v.segment(idx(game.offset(i)), idx(game.dims[i]));
  }
  return out;
}

// Near-consensus samples are where the inequality is tight.
double disagreement_scale(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3.0, 0.0);
  return std::pow(10.0, u(rng));
}

}  // namespace

std::unique_ptr<Controller> make_controller(const ScenarioBundle& bundle, const AlgorithmRun& run) {
  const std::size_t N = bundle.game.num_agents();
  switch (run.algorithm) {
    case Algorithm::ConstantGain:
      return std::make_unique<EstimateStackController>(bundle.game, bundle.graph, run.c);
    case Algorithm::AdaptiveGain:
      return std::make_unique<EstimateStackController>(bundle.game, bundle.graph, default_gamma(run.gamma, N));
    case Algorithm::AggregativeConstant:
    case Algorithm::AggregativeAdaptive:
      if (!bundle.aggregative) {
        throw Error(ErrorKind::Config, "scenario '" + bundle.name + "' has no aggregative form for " +
                                           algorithm_id(run.algorithm));
      }
      if (run.algorithm == Algorithm::AggregativeConstant)
        return std::make_unique<AggregativeController>(*bundle.aggregative, bundle.graph, run.c);
      return std::make_unique<AggregativeController>(*bundle.aggregative, bundle.graph, default_gamma(run.gamma, N));
    case Algorithm::MultiIntegrator: {
      MultiIntegratorSpec spec;
      spec.orders = bundle.orders;
      if (spec.orders.empty()) {
        for (std::size_t i = 0; i < N; ++i) spec.orders.emplace_back(bundle.game.dims[i], 1);
      }
      if (run.use_plant) spec.plant = bundle.plant;
      return std::make_unique<MultiIntegratorController>(bundle.game, bundle.graph, default_gamma(run.gamma, N),
                                                         std::move(spec));
    }
  }
  throw Error(ErrorKind::Config, "unknown algorithm");
}

RunOutcome execute_run(const ScenarioBundle& bundle, const AlgorithmRun& run) {
  RunOutcome out;
  out.algorithm = run.algorithm;
  out.label = run.label.empty() ? algorithm_id(run.algorithm) : run.label;
  const auto controller = make_controller(bundle, run);
  const Eigen::VectorXd s0 = controller->initial_state(bundle.initial_actions);
  try {
    out.trajectory = integrate(*controller, s0, run.integrator);
  } catch (const DivergenceError& e) {
    out.diverged = true;
    out.error = e.what();
    out.trajectory = e.partial();
  }
  if (out.trajectory.final_state.size() > 0) {
    out.x = controller->actions(out.trajectory.final_state);
    out.final_metrics = controller->metrics(out.trajectory.final_state);
  }
  out.converged = out.trajectory.converged;
  out.wall_seconds = out.trajectory.wall_seconds;
  out.steps = out.trajectory.steps;
  return out;
}

VerificationReport cross_validate(const ScenarioBundle& bundle, const std::vector<AlgorithmRun>& runs,
                                  double tolerance, double reference_tol) {
  VerificationReport report;
  report.scenario = bundle.name;
  report.seed = bundle.seed;
  report.tolerance = tolerance;

  std::vector<std::future<RunOutcome>> futures;
  futures.reserve(runs.size());
  for (const auto& run : runs) {
    futures.push_back(std::async(std::launch::async, [&bundle, &run] { return execute_run(bundle, run); }));
  }
  ReferenceOptions ropts;
  ropts.x0 = bundle.initial_actions;
  report.reference = solve_reference_vgne(bundle.game, reference_tol, ropts);

  for (std::size_t r = 0; r < futures.size(); ++r) {
    try {
      report.runs.push_back(futures[r].get());
    } catch (const std::exception& e) {
      RunOutcome failed;
      failed.algorithm = runs[r].algorithm;
      failed.label = runs[r].label.empty() ? algorithm_id(runs[r].algorithm) : runs[r].label;
      failed.error = e.what();
      report.runs.push_back(std::move(failed));
    }
  }

  const auto R = report.runs.size();
  const double inf = std::numeric_limits<double>::infinity();
  report.pairwise = Eigen::MatrixXd::Zero(idx(R), idx(R));
  report.to_reference = Eigen::VectorXd::Constant(idx(R), inf);
  for (std::size_t a = 0; a < R; ++a) {
    const auto& xa = report.runs[a].x;
    if (xa.size() == report.reference.x.size()) report.to_reference[idx(a)] = (xa - report.reference.x).norm();
    for (std::size_t b = a + 1; b < R; ++b) {
      const auto& xb = report.runs[b].x;
      const double d = xa.size() == xb.size() && xa.size() > 0 ? (xa - xb).norm() : inf;
      report.pairwise(idx(a), idx(b)) = report.pairwise(idx(b), idx(a)) = d;
    }
  }

  bool ok = true;
  auto check = [&](const std::string& name, bool pass) {
    report.checks.emplace_back(name, pass);
    ok = ok && pass;
  };
  for (std::size_t a = 0; a < R; ++a) {
    const auto& run = report.runs[a];
    check(run.label + ": no error", run.error.empty());
    check(run.label + ": converged", run.converged);
    if (run.converged) {
      const double run_tol = runs[a].integrator.tol;
      check(run.label + ": kkt within 10x run tolerance", run.final_metrics.kkt_residual <= 10.0 * run_tol);
    }
    check(run.label + ": distance to reference", report.to_reference[idx(a)] <= tolerance);
  }
  check("pairwise primal agreement", R < 2 || report.pairwise.maxCoeff() <= tolerance);
  report.passed = ok;
  return report;
}

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["seed"] = seed;
  j["tolerance"] = tolerance;
  j["reference"] = {{"x", vec_json(reference.x)},
                    {"lambda", vec_json(reference.lambda)},
                    {"lambda_loc", vec_json(reference.lambda_loc)},
                    {"kkt_residual", reference.residual}};
  j["runs"] = nlohmann::json::array();
  for (std::size_t a = 0; a < runs.size(); ++a) {
    const auto& r = runs[a];
    nlohmann::json jr{{"label", r.label},
                      {"algorithm", algorithm_id(r.algorithm)},
                      {"x", vec_json(r.x)},
                      {"converged", r.converged},
                      {"diverged", r.diverged},
                      {"wall_seconds", r.wall_seconds},
                      {"steps", r.steps},
                      {"final", dgne::to_json(r.final_metrics)},
                      {"distance_to_reference", to_reference[idx(a)]}};
    if (!r.error.empty()) jr["error"] = r.error;
    j["runs"].push_back(std::move(jr));
  }
  nlohmann::json pw = nlohmann::json::array();
  for (Eigen::Index a = 0; a < pairwise.rows(); ++a) pw.push_back(vec_json(pairwise.row(a).transpose()));
  j["pairwise"] = pw;
  j["checks"] = nlohmann::json::array();
  for (const auto& [name, pass] : checks) j["checks"].push_back({{"name", name}, {"passed", pass}});
  j["passed"] = passed;
  return j;
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os << "scenario " << scenario << " seed " << seed << ": " << (passed ? "PASS" : "FAIL") << "\n";
  os << "  reference kkt " << reference.residual << "\n";
  for (std::size_t a = 0; a < runs.size(); ++a) {
    const auto& r = runs[a];
    os << "  " << r.label << ": converged=" << (r.converged ? "yes" : "no") << " kkt=" << r.final_metrics.kkt_residual
       << " consensus=" << r.final_metrics.consensus_error << " |x - x*|=" << to_reference[idx(a)]
       << " wall=" << r.wall_seconds << "s";
    if (!r.error.empty()) os << " error: " << r.error;
    os << "\n";
  }
  for (const auto& [name, pass] : checks) {
    if (!pass) os << "  failed: " << name << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

LemmaReport check_lemma_inequalities(const ScenarioBundle& bundle, const LemmaOptions& options) {
  LemmaReport report;
  const GameSpec& game = bundle.game;
  const std::size_t N = game.num_agents();
  const std::size_t n = game.total_dim();
  report.lambda2 = algebraic_connectivity(bundle.graph);
  const double l2 = report.lambda2;

  ReferenceOptions ropts;
  ropts.x0 = bundle.initial_actions;
  const Eigen::VectorXd xstar = solve_reference_vgne(game, 1e-9, ropts).x;
  const auto sampler = SamplerConfig::around(xstar, options.estimate_radius, options.estimate_samples, options.seed);
  report.constants = bundle.aggregative ? estimate_aggregative_constants(*bundle.aggregative, sampler)
                                        : estimate_game_constants(game, sampler);
  const GameConstants& c = report.constants;
  std::mt19937_64 rng(options.seed + 17);

  {
    LemmaCheck chk;
    chk.name = "restricted monotonicity (estimate stack)";
    chk.k_under = min_adaptive_gain(c, l2);
    chk.k_star = options.gain_factor * chk.k_under;
    chk.matrix = restricted_monotonicity_matrix(c, N, l2, chk.k_star);
    chk.lambda_min = lambda_min(chk.matrix);
    chk.positive_definite = chk.lambda_min > 0.0;
    chk.worst_margin = std::numeric_limits<double>::quiet_NaN();
    if (chk.positive_definite) {
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < options.samples; ++s) {
        const Eigen::VectorXd y0 = uniform_around(xstar, options.sample_radius, rng);
        const Eigen::VectorXd ystack = replicate(N, y0);
        const Eigen::VectorXd xhat = uniform_around(xstar, options.sample_radius, rng);
        const Eigen::VectorXd xstack =
            replicate(N, xhat) + disagreement_scale(rng) * uniform_around(Eigen::VectorXd::Zero(idx(N * n)),
                                                                         options.sample_radius, rng);
        const Eigen::VectorXd d = xstack - ystack;
        const Eigen::VectorXd dF =
            own_block_embed(game, extended_pseudo_gradient(game, xstack) - pseudo_gradient(game, y0));
        const double lhs = d.dot(dF) + chk.k_star * apply_kron_laplacian(bundle.graph, n, d).squaredNorm();
        worst = std::min(worst, lhs - chk.lambda_min * d.squaredNorm());
      }
      chk.samples = options.samples;
      chk.worst_margin = worst;
      chk.passed = worst >= -options.margin_tol;
    } else {
      // Below the bound the matrix must lose definiteness.
      chk.passed = options.gain_factor < 1.0;
    }
    report.checks.push_back(chk);
  }

  if (bundle.aggregative && c.theta_sigma) {
    const AggregativeGameSpec& agg = *bundle.aggregative;
    const std::size_t q = agg.agg_dim;
    LemmaCheck chk;
    chk.name = "restricted monotonicity (aggregative)";
    chk.k_under = min_gain_aggregative(c, l2, true);
    chk.k_star = options.gain_factor * chk.k_under;
    chk.matrix = aggregative_monotonicity_matrix(c, l2, chk.k_star);
    chk.lambda_min = lambda_min(chk.matrix);
    chk.positive_definite = chk.lambda_min > 0.0;
    chk.worst_margin = std::numeric_limits<double>::quiet_NaN();
    if (chk.positive_definite) {
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < options.samples; ++s) {
        const Eigen::VectorXd x = uniform_around(xstar, options.sample_radius, rng);
        const Eigen::VectorXd xp = uniform_around(xstar, options.sample_radius, rng);
        Eigen::VectorXd e = disagreement_scale(rng) *
                            uniform_around(Eigen::VectorXd::Zero(idx(N * q)), options.sample_radius, rng);
        e -= replicate(N, block_mean(q, e));
        const Eigen::VectorXd sigma = replicate(N, aggregate(agg, x)) + e;
        const Eigen::VectorXd sigma_p = replicate(N, aggregate(agg, xp));
        const Eigen::VectorXd dF =
            aggregative_extended_pseudo_gradient(agg, x, sigma) - aggregative_extended_pseudo_gradient(agg, xp, sigma_p);
        const double lhs =
            (x - xp).dot(dF) + chk.k_star * apply_kron_laplacian(bundle.graph, q, sigma - sigma_p).squaredNorm();
        worst = std::min(worst, lhs - chk.lambda_min * ((x - xp).squaredNorm() + e.squaredNorm()));
      }
      chk.samples = options.samples;
      chk.worst_margin = worst;
      chk.passed = worst >= -options.margin_tol;
    } else {
      chk.passed = options.gain_factor < 1.0;
    }
    report.checks.push_back(chk);
  }

  report.passed = std::all_of(report.checks.begin(), report.checks.end(), [](const LemmaCheck& k) { return k.passed; });
  return report;
}

nlohmann::json LemmaReport::to_json() const {
  nlohmann::json j;
  j["constants"] = {{"mu", constants.mu}, {"theta0", constants.theta0}, {"theta", constants.theta}};
  if (constants.theta_sigma) j["constants"]["theta_sigma"] = *constants.theta_sigma;
  j["lambda2"] = lambda2;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    nlohmann::json m = nlohmann::json::array();
    for (int r = 0; r < 2; ++r) m.push_back({c.matrix(r, 0), c.matrix(r, 1)});
    nlohmann::json jc{{"name", c.name},           {"matrix", m},
                      {"k_under", c.k_under},     {"k_star", c.k_star},
                      {"lambda_min", c.lambda_min}, {"positive_definite", c.positive_definite},
                      {"samples", c.samples},     {"passed", c.passed}};
    if (std::isfinite(c.worst_margin)) jc["worst_margin"] = c.worst_margin;
    j["checks"].push_back(std::move(jc));
  }
  j["passed"] = passed;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

ConvexSet random_simple_set(std::size_t d, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> kind(0, 4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  switch (kind(rng)) {
    case 0:
      return ConvexSet::full_space(d);
    case 1: {
      Eigen::VectorXd lo(idx(d)), hi(idx(d));
      for (std::size_t k = 0; k < d; ++k) {
        const double a = u(rng), b = u(rng);
        lo[idx(k)] = std::min(a, b);
        hi[idx(k)] = std::max(a, b);
        if (u(rng) > 0.6) lo[idx(k)] = -std::numeric_limits<double>::infinity();
        if (u(rng) > 0.6) hi[idx(k)] = std::numeric_limits<double>::infinity();
      }
      return ConvexSet::box(lo, hi);
    }
    case 2:
      return ConvexSet::orthant(d);
    case 3: {
      Eigen::VectorXd c(idx(d));
      for (auto& v : c) v = u(rng);
      return ConvexSet::ball(c, 0.2 + std::abs(u(rng)));
    }
    default: {
      Eigen::VectorXd a(idx(d));
      for (auto& v : a) v = g(rng);
      if (a.norm() < 1e-3) a[0] = 1.0;
      return ConvexSet::halfspace(a, u(rng));
    }
  }
}

}  // namespace

GeometryReport check_geometry_properties(std::size_t samples, std::uint64_t seed) {
  GeometryReport rep;
  rep.samples = samples;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 5);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);

  auto gauss = [&](std::size_t d, double s) {
    Eigen::VectorXd v(idx(d));
    for (auto& e : v) e = s * g(rng);
    return v;
  };

  for (std::size_t s = 0; s < samples; ++s) {
    ConvexSet set = ConvexSet::full_space(1);
    if (coin(rng) < 0.3) {
      std::vector<ConvexSet> f;
      const int parts = 2 + static_cast<int>(coin(rng) * 2.0);
      for (int p = 0; p < parts; ++p) f.push_back(random_simple_set(static_cast<std::size_t>(dim(rng)), rng));
      set = ConvexSet::product(std::move(f));
    } else {
      set = random_simple_set(static_cast<std::size_t>(dim(rng)), rng);
    }
    const std::size_t d = set.dim();
    // Projections of far points land on the boundary, near points often inside.
    const Eigen::VectorXd x = project_euclidean(set, gauss(d, coin(rng) < 0.5 ? 3.0 : 0.3));
    const Eigen::VectorXd y = project_euclidean(set, gauss(d, 2.0));
    const Eigen::VectorXd v = gauss(d, 1.0);
    const double vn = v.norm();
    if (vn == 0.0) continue;

    const Eigen::VectorXd T = project_tangent_cone(set, x, v);
    const Eigen::VectorXd Nc = normal_cone_component(set, x, v);
    rep.max_reconstruction_error = std::max(rep.max_reconstruction_error, (v - T - Nc).norm() / vn);
    rep.max_orthogonality_defect = std::max(rep.max_orthogonality_defect, std::abs(T.dot(Nc)) / (vn * vn));
    const double scale = (1.0 + (x - y).norm()) * vn;
    rep.max_minorant_violation = std::max(rep.max_minorant_violation, (x - y).dot(T - v) / scale);

    // T must be feasible to first order, N must be an outward normal.
    const double eps = 1e-7;
    const double tangent_gap = set.distance(x + eps * T) / eps;
    const double normal_gap = std::max(0.0, Nc.dot(y - x)) / scale;
    rep.max_cone_violation = std::max({rep.max_cone_violation, tangent_gap / (1.0 + T.squaredNorm()), normal_gap});
  }
  rep.passed = rep.max_orthogonality_defect <= 1e-10 && rep.max_reconstruction_error <= 1e-12 &&
               rep.max_minorant_violation <= 1e-10 && rep.max_cone_violation <= 1e-5;
  return rep;
}

nlohmann::json GeometryReport::to_json() const {
  return {{"samples", samples},
          {"max_orthogonality_defect", max_orthogonality_defect},
          {"max_reconstruction_error", max_reconstruction_error},
          {"max_minorant_violation", max_minorant_violation},
          {"max_cone_violation", max_cone_violation},
          {"passed", passed}};
}

}  // namespace dgne
