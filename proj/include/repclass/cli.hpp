#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace repclass {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitSolver = 4 };

/// Runs `repclass <subcommand> ...`; args excludes the program name.
/// Normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace repclass
