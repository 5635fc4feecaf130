#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ramk::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 4;

/// Runs one subcommand. `args` excludes the program name. Logs go to `err`;
/// `out` only receives help text and metrics when no output file is given.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ramk::cli
