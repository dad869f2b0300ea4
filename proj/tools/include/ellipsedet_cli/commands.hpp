#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ellipsedet::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumerical = 3,
};

/// Runs the command line `args` (without the program name). Reports go to
/// `out`, diagnostics to `err` and the log.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv);

}  // namespace ellipsedet::cli
