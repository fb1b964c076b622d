#include "dgne/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dgne/error.hpp"
#include "dgne/graph.hpp"

namespace dgne {

namespace {

using nlohmann::json;

Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::Config, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.count(key)) throw Error(ErrorKind::Config, "unknown field '" + key + "' in " + where);
  }
}

template <class T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, where + "." + key + ": " + e.what());
  }
}

double positive(double v, const std::string& what) {
  if (!(v > 0.0)) throw Error(ErrorKind::Config, what + " must be positive", v);
  return v;
}

Eigen::VectorXd vector_from(const json& j, const std::string& what) {
  if (!j.is_array()) throw Error(ErrorKind::Config, what + " must be an array of numbers");
  Eigen::VectorXd v(idx(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (!j[k].is_number()) throw Error(ErrorKind::Config, what + " must be an array of numbers");
    v[idx(k)] = j[k].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, std::size_t rows, std::size_t cols, const std::string& what) {
  if (!j.is_array() || j.size() != rows) {
    throw Error(ErrorKind::Config, what + " must have " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd M(idx(rows), idx(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const Eigen::VectorXd row = vector_from(j[r], what);
    if (static_cast<std::size_t>(row.size()) != cols) {
      throw Error(ErrorKind::Config, what + " rows must have " + std::to_string(cols) + " entries");
    }
    M.row(idx(r)) = row.transpose();
  }
  return M;
}

}  // namespace

IntegratorConfig parse_integrator_config(const json& j, IntegratorConfig base) {
  const std::string where = "integrator";
  check_keys(j, {"step", "horizon", "tol", "stride", "max_steps", "sustain", "divergence_bound", "keep_snapshots"},
             where);
  if (j.contains("step")) base.step = get_as<double>(j, "step", where);
  if (j.contains("horizon")) base.horizon = get_as<double>(j, "horizon", where);
  if (j.contains("tol")) base.tol = get_as<double>(j, "tol", where);
  if (j.contains("stride")) base.stride = get_as<std::size_t>(j, "stride", where);
  if (j.contains("max_steps")) base.max_steps = get_as<std::size_t>(j, "max_steps", where);
  if (j.contains("sustain")) base.sustain = get_as<std::size_t>(j, "sustain", where);
  if (j.contains("divergence_bound")) base.divergence_bound = get_as<double>(j, "divergence_bound", where);
  if (j.contains("keep_snapshots")) base.keep_snapshots = get_as<bool>(j, "keep_snapshots", where);
  try {
    base.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return base;
}

RunConfig parse_run_config(const json& j) {
  const std::string where = "run config";
  check_keys(j, {"scenario", "seed", "overrides", "quadratic", "algorithm", "c", "gamma", "use_plant", "integrator",
                 "reference_tol", "out", "format"},
             where);
  RunConfig cfg;
  if (j.contains("scenario")) cfg.scenario = get_as<std::string>(j, "scenario", where);
  static const std::set<std::string> scenarios{"sensor", "el-fleet", "cournot", "quadratic"};
  if (!scenarios.count(cfg.scenario)) throw Error(ErrorKind::Config, "unknown scenario '" + cfg.scenario + "'");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j, "seed", where);

  if (j.contains("overrides")) {
    const json& o = j.at("overrides");
    const std::string ow = "overrides";
    check_keys(o, {"num_agents", "num_firms", "num_markets", "edge_probability", "participation", "zero_price_slope",
                   "zero_iso_charge", "turbine", "graph"},
               ow);
    auto& ov = cfg.overrides;
    if (o.contains("num_agents")) ov.num_agents = get_as<std::size_t>(o, "num_agents", ow);
    if (o.contains("num_firms")) ov.num_firms = get_as<std::size_t>(o, "num_firms", ow);
    if (o.contains("num_markets")) ov.num_markets = get_as<std::size_t>(o, "num_markets", ow);
    if (o.contains("edge_probability")) ov.edge_probability = get_as<double>(o, "edge_probability", ow);
    if (o.contains("participation")) ov.participation = get_as<double>(o, "participation", ow);
    if (o.contains("zero_price_slope")) ov.zero_price_slope = get_as<bool>(o, "zero_price_slope", ow);
    if (o.contains("zero_iso_charge")) ov.zero_iso_charge = get_as<bool>(o, "zero_iso_charge", ow);
    if (o.contains("turbine")) {
      const json& t = o.at("turbine");
      check_keys(t, {"alpha1", "alpha2", "alpha3", "alpha4"}, "overrides.turbine");
      TurbineParams p;
      if (t.contains("alpha1")) p.alpha1 = get_as<double>(t, "alpha1", "turbine");
      if (t.contains("alpha2")) p.alpha2 = get_as<double>(t, "alpha2", "turbine");
      if (t.contains("alpha3")) p.alpha3 = get_as<double>(t, "alpha3", "turbine");
      if (t.contains("alpha4")) p.alpha4 = get_as<double>(t, "alpha4", "turbine");
      try {
        p.validate();
      } catch (const Error& e) {
        throw Error(ErrorKind::Config, e.what());
      }
      ov.turbine = p;
    }
    if (o.contains("graph")) {
      comm_graph_from_json(o.at("graph"));  // validates
      ov.graph = o.at("graph");
    }
  }

  if (j.contains("quadratic")) cfg.quadratic = j.at("quadratic");
  if (cfg.scenario == "quadratic" && cfg.quadratic.is_null()) {
    throw Error(ErrorKind::Config, "scenario 'quadratic' needs a 'quadratic' game definition");
  }
  if (cfg.scenario != "quadratic" && !cfg.quadratic.is_null()) {
    throw Error(ErrorKind::Config, "'quadratic' is only valid with scenario 'quadratic'");
  }

  if (j.contains("algorithm")) cfg.algorithm = get_as<std::string>(j, "algorithm", where);
  if (cfg.algorithm != "oracle") algorithm_from_id(cfg.algorithm);
  if (j.contains("c")) cfg.c = positive(get_as<double>(j, "c", where), "c");
  if (j.contains("gamma")) {
    const json& g = j.at("gamma");
    cfg.gamma = g.is_number() ? Eigen::VectorXd::Constant(1, g.get<double>()) : vector_from(g, "gamma");
    for (Eigen::Index k = 0; k < cfg.gamma.size(); ++k) positive(cfg.gamma[k], "gamma");
  }
  if (j.contains("use_plant")) cfg.use_plant = get_as<bool>(j, "use_plant", where);
  if (j.contains("integrator")) {
    cfg.integrator = parse_integrator_config(j.at("integrator"));
    cfg.step_given = j.at("integrator").contains("step");
  }
  if (j.contains("reference_tol")) cfg.reference_tol = positive(get_as<double>(j, "reference_tol", where), "reference_tol");
  if (j.contains("out")) cfg.out = get_as<std::string>(j, "out", where);
  if (j.contains("format")) cfg.format = get_as<std::string>(j, "format", where);
  if (cfg.format != "csv" && cfg.format != "json") {
    throw Error(ErrorKind::Config, "format must be 'csv' or 'json', got '" + cfg.format + "'");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json j{{"scenario", c.scenario}, {"seed", c.seed}, {"algorithm", c.algorithm}, {"use_plant", c.use_plant},
         {"reference_tol", c.reference_tol}, {"out", c.out}, {"format", c.format}};
  if (c.c) j["c"] = *c.c;
  if (c.gamma.size() > 0) j["gamma"] = std::vector<double>(c.gamma.data(), c.gamma.data() + c.gamma.size());
  if (!c.quadratic.is_null()) j["quadratic"] = c.quadratic;
  const auto& i = c.integrator;
  j["integrator"] = {{"step", i.step},     {"horizon", i.horizon},     {"tol", i.tol},
                     {"stride", i.stride}, {"max_steps", i.max_steps}, {"sustain", i.sustain},
                     {"divergence_bound", i.divergence_bound}};
  json o = json::object();
  const auto& ov = c.overrides;
  if (ov.num_agents) o["num_agents"] = *ov.num_agents;
  if (ov.num_firms) o["num_firms"] = *ov.num_firms;
  if (ov.num_markets) o["num_markets"] = *ov.num_markets;
  if (ov.edge_probability) o["edge_probability"] = *ov.edge_probability;
  if (ov.participation) o["participation"] = *ov.participation;
  if (ov.zero_price_slope) o["zero_price_slope"] = *ov.zero_price_slope;
  if (ov.zero_iso_charge) o["zero_iso_charge"] = *ov.zero_iso_charge;
  if (ov.turbine) {
    o["turbine"] = {{"alpha1", ov.turbine->alpha1}, {"alpha2", ov.turbine->alpha2},
                    {"alpha3", ov.turbine->alpha3}, {"alpha4", ov.turbine->alpha4}};
  }
  if (ov.graph) o["graph"] = *ov.graph;
  if (!o.empty()) j["overrides"] = o;
  return j;
}

ScenarioBundle build_quadratic_bundle(const json& j, std::uint64_t seed) {
  const std::string where = "quadratic";
  check_keys(j, {"dims", "M", "q", "sets", "coupling", "graph", "x0"}, where);
  const auto dims = get_as<std::vector<std::size_t>>(j, "dims", where);
  if (dims.empty()) throw Error(ErrorKind::Config, "quadratic.dims must list at least one agent");
  if (std::find(dims.begin(), dims.end(), std::size_t{0}) != dims.end()) {
    throw Error(ErrorKind::Config, "quadratic.dims entries must be positive");
  }
  const std::size_t N = dims.size();
  std::size_t n = 0;
  for (auto d : dims) n += d;

  ScenarioBundle b;
  b.name = "quadratic";
  b.seed = seed;
  b.parameters = j;
  GameSpec& g = b.game;
  g.dims = dims;

  const Eigen::MatrixXd M = matrix_from(j.at("M"), n, n, "quadratic.M");
  const Eigen::VectorXd q = j.contains("q") ? vector_from(j.at("q"), "quadratic.q") : Eigen::VectorXd::Zero(idx(n));
  if (static_cast<std::size_t>(q.size()) != n) throw Error(ErrorKind::Config, "quadratic.q has the wrong length");

  if (j.contains("sets")) {
    const json& s = j.at("sets");
    if (!s.is_array() || s.size() != N) throw Error(ErrorKind::Config, "quadratic.sets needs one set per agent");
    for (const auto& e : s) g.local_sets.push_back(convex_set_from_json(e));
  } else {
    for (auto d : dims) g.local_sets.push_back(ConvexSet::full_space(d));
  }

  std::vector<std::size_t> offsets(N, 0);
  for (std::size_t i = 1; i < N; ++i) offsets[i] = offsets[i - 1] + dims[i - 1];

  if (j.contains("coupling")) {
    const json& c = j.at("coupling");
    check_keys(c, {"A", "b"}, "quadratic.coupling");
    const Eigen::VectorXd bv = vector_from(c.at("b"), "quadratic.coupling.b");
    const auto m = static_cast<std::size_t>(bv.size());
    const Eigen::MatrixXd A = matrix_from(c.at("A"), m, n, "quadratic.coupling.A");
    g.coupling_dim = m;
    for (std::size_t i = 0; i < N; ++i) {
      g.coupling.push_back(
          affine_constraint(A.middleCols(idx(offsets[i]), idx(dims[i])), bv / static_cast<double>(N)));
    }
  }

  g.cost_grad = [M, q, offsets, dims](std::size_t i, const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const auto o = idx(offsets[i]);
    const auto d = idx(dims[i]);
    return M.middleRows(o, d) * x + q.segment(o, d);
  };
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }

  b.graph = j.contains("graph") ? comm_graph_from_json(j.at("graph")) : CommGraph::complete(N);
  if (b.graph.num_agents() != N) throw Error(ErrorKind::Config, "quadratic.graph has the wrong number of agents");

  Eigen::VectorXd x0 = j.contains("x0") ? vector_from(j.at("x0"), "quadratic.x0") : Eigen::VectorXd::Zero(idx(n));
  if (static_cast<std::size_t>(x0.size()) != n) throw Error(ErrorKind::Config, "quadratic.x0 has the wrong length");
  b.initial_actions = project_euclidean(g.action_set(), x0);
  b.sample_lower = b.initial_actions.array() - 1.0;
  b.sample_upper = b.initial_actions.array() + 1.0;
  return b;
}

ScenarioBundle build_configured_scenario(const RunConfig& config) {
  const auto& ov = config.overrides;
  ScenarioBundle b;
  if (config.scenario == "quadratic") {
    b = build_quadratic_bundle(config.quadratic, config.seed);
  } else if (config.scenario == "sensor" || config.scenario == "el-fleet") {
    SensorNetworkOptions o;
    if (ov.num_agents) o.num_agents = *ov.num_agents;
    if (ov.edge_probability) o.edge_probability = *ov.edge_probability;
    b = config.scenario == "sensor" ? build_sensor_network(config.seed, o) : build_euler_lagrange_fleet(config.seed, o);
  } else if (config.scenario == "cournot") {
    CournotOptions o;
    if (ov.num_firms) o.num_firms = *ov.num_firms;
    if (ov.num_markets) o.num_markets = *ov.num_markets;
    if (ov.edge_probability) o.edge_probability = *ov.edge_probability;
    if (ov.participation) o.participation = *ov.participation;
    if (ov.zero_price_slope) o.zero_price_slope = *ov.zero_price_slope;
    if (ov.zero_iso_charge) o.zero_iso_charge = *ov.zero_iso_charge;
    if (ov.turbine) o.turbine = *ov.turbine;
    b = build_cournot_market(config.seed, o);
  } else {
    throw Error(ErrorKind::Config, "unknown scenario '" + config.scenario + "'");
  }
  if (ov.graph) {
    b.graph = comm_graph_from_json(*ov.graph);
    if (b.graph.num_agents() != b.game.num_agents()) {
      throw Error(ErrorKind::Config, "graph override has the wrong number of agents");
    }
  }
  return b;
}

AlgorithmRun to_algorithm_run(const RunConfig& config) {
  AlgorithmRun run;
  run.algorithm = algorithm_from_id(config.algorithm);
  if ((run.algorithm == Algorithm::ConstantGain || run.algorithm == Algorithm::AggregativeConstant) && !config.c) {
    throw Error(ErrorKind::Config, config.algorithm + " needs a constant gain 'c'");
  }
  if (config.c) run.c = *config.c;
  run.gamma = config.gamma;
  run.integrator = config.integrator;
  run.use_plant = config.use_plant;
  return run;
}

}  // namespace dgne
