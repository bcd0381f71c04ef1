#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace knet::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kSuccess = 0,
    kInternalError = 1,
    kConfigError = 2,
    kDataError = 3,
    kNumericError = 4,
};

/// Parses arguments (argv[0] is the program name) and runs one subcommand.
/// Artifact paths go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace knet::cli
