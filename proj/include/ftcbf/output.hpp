#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftcbf/scenario.hpp"
#include "ftcbf/sim.hpp"

namespace ftcbf {

// Every writer formats numbers with the shortest round-trip representation,
// so identical inputs give byte-identical files.

/// t, x{agent}_{coord}..., u{index}...; one row per sample.
void write_trajectory_csv(std::ostream& out, const SimResult& result);

/// enter_time, propositions (';'-joined, sorted).
void write_trace_csv(std::ostream& out, const TraceRecord& trace);

/// time, completed, entered, cycles_completed, individual_bound, composite_estimate.
void write_switch_log_csv(std::ostream& out, const std::vector<SwitchEvent>& log);

/// Smallest safety barrier value over every logged sample of the active problem.
double min_safety_value(const SimResult& result, const SimScenario& scenario);

nlohmann::json summary_json(const ScenarioFile& file, const BuiltScenario& built,
                            const SimResult& result);

/// 800 x 800 plot: workspace frame, one ellipse per region, one path per
/// agent, a marker at each switch.
std::string render_trajectory_svg(const ScenarioFile& file, const SimResult& result);

struct RunFiles {
  static constexpr const char* kScenario = "scenario.json";
  static constexpr const char* kTrajectory = "trajectory.csv";
  static constexpr const char* kTrace = "trace.csv";
  static constexpr const char* kSwitchLog = "switch_log.csv";
  static constexpr const char* kSummary = "summary.json";
  static constexpr const char* kPlot = "trajectory.svg";
  static constexpr const char* kProgressCsv = "progress.csv";
  static constexpr const char* kProgressSvg = "progress.svg";
};

/// Writes all run outputs into `dir` (created if needed). `file` is the
/// effective scenario, overrides applied.
void write_run_outputs(const std::filesystem::path& dir, const ScenarioFile& file,
                       const BuiltScenario& built, const SimResult& result);

/// Samples read back from a run directory.
struct LoadedRun {
  ScenarioFile file;
  std::vector<double> times;
  std::vector<StackedState> states;
  /// Lasso position driving each sample, reconstructed from the switch log.
  std::vector<std::size_t> active_problem;
};

/// Throws PreconditionError when a required file is missing or malformed.
LoadedRun load_run(const std::filesystem::path& dir);

struct ProgressTable {
  /// Bounded goal ids over all problems, in first-seen order.
  std::vector<std::string> goal_ids;
  std::vector<double> times;
  std::vector<std::string> problem;
  /// levels[k][g] = h_{goal_ids[g]}(x_k).
  std::vector<std::vector<double>> levels;
  /// Weighted sum over the active problem's bounded goals.
  std::vector<double> weighted_sum;
  /// (W(x_{k+1}) - W(x_k)) / dt with W of sample k's problem; absent for the last sample.
  std::vector<std::optional<double>> rate;
  /// Some bounded goal of the active problem is still negative.
  std::vector<bool> pre_goal;
};

ProgressTable progress_table(const LoadedRun& run);

void write_progress_csv(std::ostream& out, const ProgressTable& table);

/// Three stacked panels: goal level sets, weighted sum, rate.
std::string render_progress_svg(const ProgressTable& table);

}  // namespace ftcbf
