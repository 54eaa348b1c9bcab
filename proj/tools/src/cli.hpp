#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pathbench::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitBackend = 3,
};

/**
 * Entry point of the `pathbench` tool. `args` excludes the program name and
 * starts with the subcommand. Data goes to files or `out`; diagnostics go to
 * `err`.
 *
 * Settings resolve as command-line flags, then environment
 * (`PATHBENCH_THREADS`), then the key=value file named by `--config` or
 * `PATHBENCH_CONFIG`.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace pathbench::cli
