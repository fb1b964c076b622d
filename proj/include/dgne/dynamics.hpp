#pragma once

// Projected forward-Euler integration of projected dynamical systems
// s' = Pi_S(s, raw(s)):
//
//   s+ = proj_S(s + h raw(s))
//
// The discrete map keeps every iterate inside S and its fixed points are
// exactly the zeros of the continuous projected field.

#include <Eigen/Dense>
#include "json.hpp"

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgne/error.hpp"
#include "dgne/geometry.hpp"

namespace dgne {

struct MetricRecord {
  double kkt_residual = 0.0;
  double consensus_error = 0.0;
  double dual_consensus_error = 0.0;
  double constraint_violation = 0.0;
  /// |max(0, g_loc(x))| for dualized local constraints, 0 otherwise.
  double local_violation = 0.0;
  /// Norm of the projected field at the recorded state.
  double field_norm = 0.0;
  Eigen::VectorXd gains;
  std::optional<double> lyapunov;
};

/// A projected dynamical system on a flat state vector.
class FlowSystem {
 public:
  virtual ~FlowSystem() = default;

  virtual std::size_t dimension() const = 0;
  virtual const ConvexSet& admissible_set() const = 0;
  /// The argument of the tangent-cone projection (pre-projection velocity).
  virtual Eigen::VectorXd raw_field(const Eigen::VectorXd& state) const = 0;
  virtual MetricRecord metrics(const Eigen::VectorXd& state) const = 0;

  /// Pi_S(s, raw(s)).
  Eigen::VectorXd field(const Eigen::VectorXd& state) const;
};

struct IntegratorConfig {
  double step = 1e-3;
  double horizon = 10.0;
  /// Convergence when kkt_residual + consensus_error <= tol for `sustain`
  /// consecutive records. tol <= 0 disables early stopping.
  double tol = 1e-8;
  std::size_t stride = 1;
  std::size_t max_steps = 50'000'000;
  std::size_t sustain = 10;
  double divergence_bound = 1e12;
  bool keep_snapshots = true;

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> snapshots;
  std::vector<MetricRecord> metrics;
  Eigen::VectorXd final_state;
  std::size_t steps = 0;
  bool converged = false;
  double wall_seconds = 0.0;
};

/// Raised by integrate when the state leaves the divergence bound or stops
/// being finite; carries everything recorded up to the last finite record.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Trajectory partial)
      : Error(ErrorKind::Divergence, what), partial_(std::move(partial)) {}
  const Trajectory& partial() const noexcept { return partial_; }

 private:
  Trajectory partial_;
};

using RawField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// One projected-Euler step. The state must lie in `set` (membership
/// tolerance as in project_tangent_cone).
Eigen::VectorXd step(const RawField& raw, const ConvexSet& set, const Eigen::VectorXd& state, double h);
Eigen::VectorXd step(const FlowSystem& system, const Eigen::VectorXd& state, double h);

/// Called on every record with (time, state, metrics).
using RecordObserver = std::function<void(double, const Eigen::VectorXd&, const MetricRecord&)>;

/// Iterates `step` until the horizon, convergence, or max_steps. Records at
/// step 0, every `stride` steps, and the final step.
Trajectory integrate(const FlowSystem& system, const Eigen::VectorXd& state0, const IntegratorConfig& config,
                     const RecordObserver& observer = {});

/// CSV export. First line is a "# dgne-trajectory v1" comment; columns are
/// t, the metric fields, gains k_i, then the selected state coordinates.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const std::vector<std::size_t>& state_columns,
                          const std::vector<std::string>& state_names);

/// Converged flag, final metrics, steps, wall time.
nlohmann::json trajectory_summary(const Trajectory& traj);
nlohmann::json to_json(const MetricRecord& record);

}  // namespace dgne
