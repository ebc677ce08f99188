#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chsep {

enum class ErrorKind {
  DegenerateMobility,
  NotMeanFree,
  SolverStall,
  OutOfDomain,
  InvalidSpec,
  NewtonDiverged,
  BoundaryCollision,
  GridMismatch,
  EmptyWindow,
  InvalidParams,
  NoGoodTimes,
  InsufficientData,
  NonPositiveGap,
  ProjectionStall,
  CFLViolation,
  ParseError,
  ValidationError,
  Io,
};

inline constexpr std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::DegenerateMobility: return "degenerate_mobility";
    case ErrorKind::NotMeanFree: return "not_mean_free";
    case ErrorKind::SolverStall: return "solver_stall";
    case ErrorKind::OutOfDomain: return "out_of_domain";
    case ErrorKind::InvalidSpec: return "invalid_spec";
    case ErrorKind::NewtonDiverged: return "newton_diverged";
    case ErrorKind::BoundaryCollision: return "boundary_collision";
    case ErrorKind::GridMismatch: return "grid_mismatch";
    case ErrorKind::EmptyWindow: return "empty_window";
    case ErrorKind::InvalidParams: return "invalid_params";
    case ErrorKind::NoGoodTimes: return "no_good_times";
    case ErrorKind::InsufficientData: return "insufficient_data";
    case ErrorKind::NonPositiveGap: return "non_positive_gap";
    case ErrorKind::ProjectionStall: return "projection_stall";
    case ErrorKind::CFLViolation: return "cfl_violation";
    case ErrorKind::ParseError: return "parse";
    case ErrorKind::ValidationError: return "validation";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace chsep
