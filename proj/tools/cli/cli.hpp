#pragma once

#include <string>
#include <vector>

namespace ipad::cli {

enum ExitCode : int { ok = 0, runtime_failure = 1, validation_failure = 2 };

/// Parses the command line and runs `simulate`, `select` or `forecast`.
/// Errors are reported on stderr; the return value is the process exit code.
int run(int argc, const char* const* argv);

/// Convenience overload for tests: args excludes the program name.
int run(const std::vector<std::string>& args);

}  // namespace ipad::cli
