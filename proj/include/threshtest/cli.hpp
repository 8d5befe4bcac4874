#pragma once

// Command-line front end: test, calibrate, region, power, level.

#include <iosfwd>
#include <string>
#include <vector>

#include "threshtest/errors.hpp"

namespace threshtest::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,       // parse / validation errors
  kUntestable = 3,  // Untestable or NotApplicable
  kInternal = 4,
};

int exit_code_for(ErrorKind kind);

/// args[0] is the program name. Results go to `out` unless --out names a
/// file; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace threshtest::cli
