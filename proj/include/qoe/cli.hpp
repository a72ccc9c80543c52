#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qoe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `qoe` command line (arguments exclude the program name). Command
/// output goes to `out`; diagnostics and error lines go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qoe::cli
