#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ramstore {

/// Global settings. Flags override the --config document, which overrides
/// the built-in defaults.
struct CliConfig {
  std::string shared_dir;  // default: $RAMSTORE_SHARED_DIR or <tmp>/ramstore-shared-<uid>
  std::string cluster_id = "ramstore";
  bool verbose = false;
};

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ramstore
