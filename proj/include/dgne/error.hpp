#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace dgne {

enum class ErrorKind {
  DimensionMismatch,
  NotInSet,
  InvalidArgument,
  Disconnected,
  NonConvergence,
  Divergence,
  AssumptionViolation,
  Config,
};

const char* to_string(ErrorKind kind);

/// Library-wide exception. `value()` carries the offending quantity when one
/// exists (last residual, distance to a set, ...), NaN otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, double value = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), value_(value) {}

  ErrorKind kind() const noexcept { return kind_; }
  double value() const noexcept { return value_; }

 private:
  ErrorKind kind_;
  double value_;
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::NotInSet: return "not in set";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::Disconnected: return "disconnected graph";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::AssumptionViolation: return "assumption violation";
    case ErrorKind::Config: return "config error";
  }
  return "error";
}

inline void require_dim(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw Error(ErrorKind::DimensionMismatch,
                std::string(what) + ": expected " + std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace dgne
