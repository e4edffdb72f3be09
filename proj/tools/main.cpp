#include <iostream>

#include "CLI11.hpp"

#include "ftcbf/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Finite-time CBF controller synthesis for lasso-shaped multi-agent tasks"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir = "run";
  ftcbf::RunOverrides overrides;
  auto* run = app.add_subcommand("run", "simulate a scenario and write its outputs");
  run->add_option("scenario", scenario, "scenario JSON file")->required();
  run->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--dt", overrides.dt, "integration step (s)");
  run->add_option("--gamma", overrides.gamma, "finite-time gain");
  run->add_option("--rho", overrides.rho, "finite-time exponent in [0, 1)");
  run->add_option("--epsilon", overrides.epsilon, "complement margin for every proposition");
  run->add_option("--cycles", overrides.cycles, "suffix cycles to complete");
  run->add_option("--max-time", overrides.max_time, "simulation horizon (s)");

  std::string run_dir;
  auto* progress = app.add_subcommand("progress", "progress series of a finished run");
  progress->add_option("run_dir", run_dir, "directory written by 'run'")->required();

  ftcbf::VerifyArgs verify_args;
  std::string verify_scenario;
  std::string report_path;
  auto* verify = app.add_subcommand("verify", "run the property verification suites");
  verify->add_option("scenario", verify_scenario, "scenario JSON file (bundled golden scenario if omitted)");
  verify->add_flag("--sweep", verify_args.sweep, "add the gamma x rho invariance sweep");
  verify->add_option("--report", report_path, "write the JSON report to this file ('-' for stdout)");
  verify->add_flag("--inject-bad-gradient", verify_args.inject_bad_gradient)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : ftcbf::kExitError;
  }

  if (*run) return ftcbf::cmd_run(scenario, out_dir, overrides, std::cout, std::cerr);
  if (*progress) return ftcbf::cmd_progress(run_dir, std::cout, std::cerr);
  if (!verify_scenario.empty()) verify_args.scenario = verify_scenario;
  if (!report_path.empty()) verify_args.report = report_path;
  return ftcbf::cmd_verify(verify_args, std::cout, std::cerr);
}
