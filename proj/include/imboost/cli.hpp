#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace imboost {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `imboost` tool; `args` excludes the program name.
/// Subcommands: run, bench, sweep, serve.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imboost
