#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dialsynth::cli {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kUsageError = 2,
  kMissingInput = 3,
  kCredentialError = 4,
  kInvalidInput = 5,
};

/// Runs one subcommand. `args` excludes the program name. Reports go to
/// `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace dialsynth::cli
