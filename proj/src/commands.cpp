#include "ftcbf/commands.hpp"

#include <fstream>
#include <iostream>
#include <limits>

#include <fmt/format.h>

#include "ftcbf/output.hpp"
#include "ftcbf/verify.hpp"

namespace ftcbf {

namespace {

int exit_code(RunStatus status) {
  switch (status) {
    case RunStatus::kAccepted: return kExitOk;
    case RunStatus::kRejected:
    case RunStatus::kTimeout: return kExitRejected;
    case RunStatus::kInfeasible: return kExitInfeasible;
  }
  return kExitError;
}

}  // namespace

int cmd_run(const std::filesystem::path& scenario_path, const std::filesystem::path& out_dir,
            const RunOverrides& overrides, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioFile file = apply_overrides(load_scenario(scenario_path), overrides);
    const BuiltScenario built = build(file);
    const SimResult result = run(built.sim, built.config);
    write_run_outputs(out_dir, file, built, result);
    const double lowest = min_safety_value(result, built.sim);
    const double violation = std::isfinite(lowest) ? std::max(0.0, -lowest) : 0.0;
    out << fmt::format("{}: cycles {}/{}, max safety violation {:.6g}, steps {}, t_end {}", to_string(result.status),
                       result.cycles_completed, built.config.suffix_cycles_target, violation, result.size(),
                       result.times.empty() ? 0.0 : result.times.back());
    if (result.failure) out << " | " << *result.failure;
    out << '\n';
    return exit_code(result.status);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_progress(const std::filesystem::path& run_dir, std::ostream& out, std::ostream& err) {
  try {
    const LoadedRun loaded = load_run(run_dir);
    const ProgressTable table = progress_table(loaded);
    {
      std::ofstream csv(run_dir / RunFiles::kProgressCsv, std::ios::binary);
      if (!csv) throw PreconditionError("cannot write progress.csv");
      write_progress_csv(csv, table);
    }
    {
      std::ofstream svg(run_dir / RunFiles::kProgressSvg, std::ios::binary);
      if (!svg) throw PreconditionError("cannot write progress.svg");
      svg << render_progress_svg(table);
    }
    std::size_t pending = 0;
    double min_rate = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < table.times.size(); ++k) {
      if (!table.pre_goal[k]) continue;
      ++pending;
      if (table.rate[k]) min_rate = std::min(min_rate, *table.rate[k]);
    }
    out << fmt::format("progress: {} samples, {} pre-goal, min pre-goal rate {}\n", table.times.size(), pending,
                       std::isfinite(min_rate) ? fmt::format("{:.6g}", min_rate) : "n/a");
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

int cmd_verify(const VerifyArgs& args, std::ostream& out, std::ostream& err) {
  verify::Options options;
  options.sweep = args.sweep;
  options.inject_bad_gradient = args.inject_bad_gradient;
  verify::Report report;
  try {
    if (args.scenario) options.scenario = load_scenario(*args.scenario);
    report = verify::run_all(options);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  for (const auto& s : report.suites) {
    out << fmt::format("{:<18} {}  {}\n", s.name, s.passed ? "PASS" : "FAIL", s.note);
  }
  if (args.report) {
    const std::string text = report.to_json().dump(2) + "\n";
    if (*args.report == "-") {
      out << text;
    } else {
      std::ofstream file(*args.report, std::ios::binary);
      if (!file) {
        err << "error: cannot write " << args.report->string() << '\n';
        return kExitError;
      }
      file << text;
    }
  }
  return report.passed() ? kExitOk : kExitError;
}

}  // namespace ftcbf
