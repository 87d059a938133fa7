#pragma once

#include <iosfwd>

namespace crisp {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Parses the command line and runs one subcommand. Messages go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& err);

}  // namespace crisp
