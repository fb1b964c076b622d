#include "dgne/dynamics.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

namespace dgne {

Eigen::VectorXd FlowSystem::field(const Eigen::VectorXd& state) const {
  return project_tangent_cone(admissible_set(), state, raw_field(state));
}

void IntegratorConfig::validate() const {
  if (!(step > 0.0) || !std::isfinite(step)) throw Error(ErrorKind::InvalidArgument, "step must be positive", step);
  if (!(horizon > step)) throw Error(ErrorKind::InvalidArgument, "horizon must exceed the step", horizon);
  if (stride == 0) throw Error(ErrorKind::InvalidArgument, "record stride must be at least 1");
  if (sustain == 0) throw Error(ErrorKind::InvalidArgument, "sustain count must be at least 1");
  if (max_steps == 0) throw Error(ErrorKind::InvalidArgument, "max_steps must be at least 1");
  if (!(divergence_bound > 0.0)) throw Error(ErrorKind::InvalidArgument, "divergence bound must be positive");
}

Eigen::VectorXd step(const RawField& raw, const ConvexSet& set, const Eigen::VectorXd& state, double h) {
  require_dim(static_cast<std::size_t>(state.size()), set.dim(), "state");
  const double dist = set.distance(state);
  if (dist > membership_tolerance(state)) {
    throw Error(ErrorKind::NotInSet, "state is outside the admissible set " + set.name(), dist);
  }
  Eigen::VectorXd next = state + h * raw(state);
  project_in_place(set, next);
  return next;
}

Eigen::VectorXd step(const FlowSystem& system, const Eigen::VectorXd& state, double h) {
  return step([&system](const Eigen::VectorXd& s) { return system.raw_field(s); }, system.admissible_set(), state, h);
}

namespace {

bool finite_and_bounded(const Eigen::VectorXd& s, double bound) {
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (!std::isfinite(s[j]) || std::abs(s[j]) > bound) return false;
  }
  return true;
}

}  // namespace

Trajectory integrate(const FlowSystem& system, const Eigen::VectorXd& state0, const IntegratorConfig& config,
                     const RecordObserver& observer) {
  config.validate();
  const ConvexSet& set = system.admissible_set();
  require_dim(static_cast<std::size_t>(state0.size()), system.dimension(), "initial state");
  require_dim(set.dim(), system.dimension(), "admissible set");
  const double dist = set.distance(state0);
  if (dist > membership_tolerance(state0)) {
    throw Error(ErrorKind::NotInSet, "initial state is outside the admissible set " + set.name(), dist);
  }

  const auto t_start = std::chrono::steady_clock::now();
  const std::size_t total =
      std::min(config.max_steps, static_cast<std::size_t>(std::llround(std::ceil(config.horizon / config.step - 1e-9))));

  Trajectory traj;
  Eigen::VectorXd s = state0;
  Eigen::VectorXd raw(s.size());
  std::size_t streak = 0;

  auto wall = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  // Returns true once convergence has been sustained.
  auto record = [&](std::size_t k) {
    MetricRecord rec = system.metrics(s);
    rec.field_norm = project_tangent_cone(set, s, system.raw_field(s)).norm();
    const double t = static_cast<double>(k) * config.step;
    traj.times.push_back(t);
    if (config.keep_snapshots) traj.snapshots.push_back(s);
    if (observer) observer(t, s, rec);
    const bool ok = config.tol > 0.0 && rec.kkt_residual + rec.consensus_error <= config.tol;
    traj.metrics.push_back(std::move(rec));
    streak = ok ? streak + 1 : 0;
    return streak >= config.sustain;
  };

  bool done = record(0);
  std::size_t k = 0;
  while (!done && k < total) {
    raw = system.raw_field(s);
    s.noalias() += config.step * raw;
    project_in_place(set, s);
    ++k;
    if (!finite_and_bounded(s, config.divergence_bound)) {
      traj.steps = k;
      traj.final_state = traj.snapshots.empty() ? state0 : traj.snapshots.back();
      traj.wall_seconds = wall();
      throw DivergenceError("state left the divergence bound at t = " + std::to_string(k * config.step),
                            std::move(traj));
    }
    if (k % config.stride == 0 || k == total) done = record(k);
  }
  // The final step is always recorded, also when stopped between strides.
  if (traj.times.empty() || traj.times.back() != static_cast<double>(k) * config.step) record(k);

  traj.converged = done;
  traj.steps = k;
  traj.final_state = s;
  traj.wall_seconds = wall();
  return traj;
}

nlohmann::json to_json(const MetricRecord& r) {
  nlohmann::json j{{"kkt_residual", r.kkt_residual},
                   {"consensus_error", r.consensus_error},
                   {"dual_consensus_error", r.dual_consensus_error},
                   {"constraint_violation", r.constraint_violation},
                   {"local_violation", r.local_violation},
                   {"field_norm", r.field_norm}};
  j["gains"] = std::vector<double>(r.gains.data(), r.gains.data() + r.gains.size());
  if (r.lyapunov) j["lyapunov"] = *r.lyapunov;
  return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::size_t>& state_columns,
                          const std::vector<std::string>& state_names) {
  if (!state_names.empty() && state_names.size() != state_columns.size()) {
    throw Error(ErrorKind::DimensionMismatch, "state column names do not match the selected columns");
  }
  if (!state_columns.empty() && traj.snapshots.size() != traj.times.size()) {
    throw Error(ErrorKind::InvalidArgument, "state columns requested but snapshots were not kept");
  }
  const std::size_t num_gains = traj.metrics.empty() ? 0 : static_cast<std::size_t>(traj.metrics.front().gains.size());
  const bool has_lyap = !traj.metrics.empty() && traj.metrics.front().lyapunov.has_value();

  out << "# dgne-trajectory v1\n";
  out << "t,kkt_residual,consensus_error,dual_consensus_error,constraint_violation,local_violation,field_norm";
  if (has_lyap) out << ",lyapunov";
  for (std::size_t i = 0; i < num_gains; ++i) out << ",k_" << i;
  for (std::size_t c = 0; c < state_columns.size(); ++c) {
    out << ',' << (state_names.empty() ? "s_" + std::to_string(state_columns[c]) : state_names[c]);
  }
  out << '\n';

  out << std::setprecision(17);
  for (std::size_t r = 0; r < traj.times.size(); ++r) {
    const auto& m = traj.metrics[r];
    out << traj.times[r] << ',' << m.kkt_residual << ',' << m.consensus_error << ',' << m.dual_consensus_error << ','
        << m.constraint_violation << ',' << m.local_violation << ',' << m.field_norm;
    if (has_lyap) out << ',' << m.lyapunov.value_or(std::nan(""));
    for (std::size_t i = 0; i < num_gains; ++i) out << ',' << m.gains[static_cast<Eigen::Index>(i)];
    for (auto c : state_columns) out << ',' << traj.snapshots[r][static_cast<Eigen::Index>(c)];
    out << '\n';
  }
}

nlohmann::json trajectory_summary(const Trajectory& traj) {
  nlohmann::json j{{"converged", traj.converged},
                   {"steps", traj.steps},
                   {"records", traj.times.size()},
                   {"wall_seconds", traj.wall_seconds}};
  if (!traj.times.empty()) j["final_time"] = traj.times.back();
  if (!traj.metrics.empty()) j["final"] = to_json(traj.metrics.back());
  return j;
}

}  // namespace dgne
