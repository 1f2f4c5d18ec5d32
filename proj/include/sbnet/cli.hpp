#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sbnet {

/// Process exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumerical = 3,
};

/// Entry point of the `sbnet` tool. `args` excludes the program name.
/// Results go to `out`, progress and errors to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sbnet
