#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>

#include "ftcbf/scenario.hpp"

namespace ftcbf {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,  // schema, precondition or I/O problem
  kExitRejected = 2,  // verdict reject or timeout
  kExitInfeasible = 3,
};

/// Simulates the scenario and writes the run outputs into out_dir.
int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            const RunOverrides& overrides, std::ostream& out, std::ostream& err);

/// Reads a run directory and writes progress.csv and progress.svg into it.
int cmd_progress(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err);

struct VerifyArgs {
  std::optional<std::filesystem::path> scenario;
  bool sweep = false;
  /// Write the JSON report here ("-" for stdout).
  std::optional<std::filesystem::path> report;
  bool inject_bad_gradient = false;
};

/// Exit 0 iff every suite passes.
int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err);

}  // namespace ftcbf
