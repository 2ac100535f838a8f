#ifndef POLECAL_ERROR_HPP
#define POLECAL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace polecal {

/// Failure classes surfaced by the library. The numeric value doubles as the
/// CLI process exit code, so codes are stable across releases.
enum class ErrorCode : int {
  ConfigError = 2,
  IoError = 3,
  NoRetroReflectiveReturns = 4,
  TooFewClusters = 5,
  ParallelPoles = 6,
  DegenerateGeometry = 7,
  RankDeficient = 8,
  NoCorrespondences = 9,
  DisambiguationFailed = 10,
  NonConvergence = 11,
  InvalidArgument = 12,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::ConfigError:
      return "config-error";
    case ErrorCode::IoError:
      return "io-error";
    case ErrorCode::NoRetroReflectiveReturns:
      return "no-retro-reflective-returns";
    case ErrorCode::TooFewClusters:
      return "too-few-clusters";
    case ErrorCode::ParallelPoles:
      return "parallel-poles";
    case ErrorCode::DegenerateGeometry:
      return "degenerate-geometry";
    case ErrorCode::RankDeficient:
      return "rank-deficient";
    case ErrorCode::NoCorrespondences:
      return "no-correspondences";
    case ErrorCode::DisambiguationFailed:
      return "disambiguation-failed";
    case ErrorCode::NonConvergence:
      return "non-convergence";
    case ErrorCode::InvalidArgument:
      return "invalid-argument";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }
  int exit_code() const { return static_cast<int>(code_); }

 private:
  ErrorCode code_;
};

}  // namespace polecal

#endif  // POLECAL_ERROR_HPP
