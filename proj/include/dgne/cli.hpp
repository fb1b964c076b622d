#pragma once

// Command-line front end: run, gains, verify, export.
//
// Exit codes: 0 success / converged, 1 not converged or a verification
// failure, 2 configuration or usage error, 3 divergence, 4 assumption
// violation (disconnected graph, monotonicity not detected, ...).

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dgne/config.hpp"

namespace dgne {

enum ExitCode : int {
  kExitOk = 0,
  kExitNotConverged = 1,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitAssumption = 4,
};

/// Maps an error to its exit code.
int exit_code_for(const Error& error);

struct CliContext {
  std::ostream* out;
  std::ostream* err;
  bool quiet = false;
};

/// Writes the trajectory (csv or json) and summary.json into config.out.
int cmd_run(const RunConfig& config, const CliContext& ctx);

/// Prints constants and all gain bounds; `json_output` switches to JSON.
int cmd_gains(const RunConfig& config, std::size_t samples, bool json_output, const CliContext& ctx);

/// Suites: sensor-cross, cournot-cross, el-cross, lemma-ineq, geometry.
/// Writes verify-<suite>.json into `out` when given.
int cmd_verify(const std::string& suite, std::uint64_t seed, const std::optional<std::string>& out,
               const CliContext& ctx);
std::vector<std::string> verify_suites();

/// Writes the scenario description (scenario.json in `out`, or stdout).
int cmd_export(const RunConfig& config, const std::optional<std::string>& out, const CliContext& ctx);

/// Full argument parsing and dispatch; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dgne
