#pragma once

// The `microforge` command-line tool.
//
//   microforge sample|optimise|props|generate|analyse [--config PATH]
//              [--seed N] [--threads K] [--out DIR] ...

#include <iosfwd>
#include <string>
#include <vector>

namespace microforge {

namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kEvaluationFailure = 3;
inline constexpr int kIoError = 4;
}  // namespace exit_code

/// `args` excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace microforge
