#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace threshtest {

enum class ErrorKind {
  DimensionMismatch,
  RankDeficient,
  Untestable,
  NotApplicable,
  Degenerate,
  InsufficientDraws,
  StatisticMismatch,
  NoConvergence,
  UnsupportedScale,
  SingularSystem,
  DomainError,
  InvalidSpec,
  UnsupportedDimension,
  Overflow,
  Parse,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception; `kind()` lets callers (the CLI in particular)
/// map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace threshtest
