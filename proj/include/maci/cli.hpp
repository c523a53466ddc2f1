#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace maci::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kValidation = 2,
  kDegenerate = 3,  // calibration produced only unit thresholds; model still written
};

/// Runs one subcommand. `args` excludes the program name.
int run_command(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace maci::cli
