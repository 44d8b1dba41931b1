#pragma once

// Command-line entry point. Subcommands: simulate, kl, train, sweep, plot,
// eval. Run with --help for the flags of each.

#include <iosfwd>
#include <string>
#include <vector>

namespace dtl::cli {

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "DTL_OUTPUT_ROOT";

/// Exit codes: 0 success, 1 runtime failure or a sweep with failed cells,
/// 2 bad usage, invalid input or a model structure mismatch.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dtl::cli
