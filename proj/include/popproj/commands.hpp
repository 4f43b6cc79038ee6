#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "popproj/config.hpp"

namespace popproj::cli {

enum ExitCode : int { kOk = 0, kError = 1, kWarnings = 2 };

/// Chains on disk were produced under a different model or config.
class ChainMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Each command writes into `out_dir` and prints a short summary to `out`.
// Returns kOk or kWarnings; errors are thrown.
int cmd_estimate(const cfg::RunConfig& config, const std::filesystem::path& out_dir,
                 std::ostream& out);
int cmd_project(const cfg::RunConfig& config, const std::filesystem::path& out_dir,
                std::ostream& out);
int cmd_validate(const cfg::RunConfig& config, const std::filesystem::path& out_dir,
                 std::ostream& out);
int cmd_diagnose(const cfg::RunConfig& config, const std::filesystem::path& out_dir,
                 std::ostream& out);

/// Parses arguments, runs the subcommand and maps failures to kError.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace popproj::cli
