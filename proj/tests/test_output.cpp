#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ftcbf/output.hpp"

using namespace ftcbf;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  ScenarioFile file;
  BuiltScenario built;
  SimResult result;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    RunOverrides o;
    o.dt = 0.01;
    o.cycles = 1;
    auto file = apply_overrides(golden_scenario(), o);
    auto built = build(file);
    auto result = run(built.sim, built.config);
    return Fixture{std::move(file), std::move(built), std::move(result)};
  }();
  return f;
}

std::size_t count(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

template <class Writer>
std::string render(Writer&& w) {
  std::ostringstream out;
  w(out);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("trajectory csv") {
  const auto& f = fixture();
  REQUIRE(f.result.status == RunStatus::kAccepted);
  const auto text = render([&](std::ostream& o) { write_trajectory_csv(o, f.result); });
  CHECK(text == render([&](std::ostream& o) { write_trajectory_csv(o, f.result); }));
  const auto rows = lines(text);
  CHECK(rows.size() == f.result.size() + 1);
  CHECK(rows[0] == "t,x0_0,x0_1,x1_0,x1_1,u0,u1,u2,u3");
  CHECK(rows[1].rfind("0,-1,-1.5,1,-1.5,", 0) == 0);
  CHECK(count(rows[5], ",") == 8);
}

TEST_CASE("trace and switch log csv") {
  const auto& f = fixture();
  const auto trace = lines(render([&](std::ostream& o) { write_trace_csv(o, f.result.trace); }));
  CHECK(trace.size() == f.result.trace.entries().size() + 1);
  CHECK(trace[0] == "enter_time,propositions");
  CHECK(trace[1] == "0,globe");

  const auto log = lines(render([&](std::ostream& o) { write_switch_log_csv(o, f.result.switch_log); }));
  CHECK(log.size() == f.result.switch_log.size() + 1);
  CHECK(log[0] == "time,completed,entered,cycles_completed,individual_bound,composite_estimate");
  CHECK(log[1].rfind("0,,R1,0,,", 0) == 0);
}

TEST_CASE("summary") {
  const auto& f = fixture();
  const auto s = summary_json(f.file, f.built, f.result);
  CHECK(s["status"] == "accept");
  CHECK(s["steps"] == f.result.size());
  CHECK(s["cycles_completed"] == 1);
  CHECK(s["verdict"]["accepted"] == true);
  CHECK(s["violations"] == 0);
  CHECK(s["min_safety_value"].get<double>() >= 0.0);
  CHECK(s["min_safety_value"].get<double>() == min_safety_value(f.result, f.built.sim));
}

TEST_CASE("trajectory svg") {
  const auto& f = fixture();
  const auto svg = render_trajectory_svg(f.file, f.result);
  CHECK(svg == render_trajectory_svg(f.file, f.result));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "<ellipse") == 4);
  CHECK(count(svg, "<path") == 2);
  // One marker per agent at each completed problem.
  CHECK(count(svg, "<circle") == 2 * (f.result.switch_log.size() - 1));
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("run outputs round trip") {
  const auto& f = fixture();
  const auto dir = fresh_dir("ftcbf_test_output_run");
  write_run_outputs(dir, f.file, f.built, f.result);
  for (const char* name : {RunFiles::kScenario, RunFiles::kTrajectory, RunFiles::kTrace,
                           RunFiles::kSwitchLog, RunFiles::kSummary, RunFiles::kPlot}) {
    CHECK(fs::exists(dir / name));
  }
  const auto again = fresh_dir("ftcbf_test_output_run2");
  write_run_outputs(again, f.file, f.built, f.result);
  CHECK(slurp(dir / RunFiles::kTrajectory) == slurp(again / RunFiles::kTrajectory));
  CHECK(slurp(dir / RunFiles::kPlot) == slurp(again / RunFiles::kPlot));

  const auto loaded = load_run(dir);
  CHECK(loaded.file == f.file);
  CHECK(loaded.times == f.result.times);
  CHECK(loaded.states == f.result.states);
  CHECK(loaded.active_problem == f.result.active_problem);

  const auto table = progress_table(loaded);
  CHECK(table.goal_ids == std::vector<std::string>{"pi1A", "pi2B", "pi1C", "pi2C"});
  CHECK(table.times.size() == f.result.size());
  CHECK_FALSE(table.rate.back().has_value());
  CHECK(std::count(table.pre_goal.begin(), table.pre_goal.end(), true) > 0);
  const double dt = f.built.config.dt;
  for (std::size_t k = 0; k + 1 < table.times.size(); ++k) {
    // The sample that completes a problem is compared under the next one.
    if (table.pre_goal[k] && table.problem[k] == table.problem[k + 1]) {
      CHECK(*table.rate[k] >= f.built.config.params.gamma() - 1e-4 / dt);
    }
  }
  const auto csv = lines(render([&](std::ostream& o) { write_progress_csv(o, table); }));
  CHECK(csv[0] == "t,problem,h_pi1A,h_pi2B,h_pi1C,h_pi2C,weighted_sum,rate,pre_goal");
  CHECK(csv.size() == table.times.size() + 1);
  const auto svg = render_progress_svg(table);
  CHECK(svg == render_progress_svg(table));
  CHECK(count(svg, "<path") >= 3);

  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST_CASE("load_run errors") {
  CHECK_THROWS_AS(load_run("/nonexistent/run"), PreconditionError);
  const auto dir = fresh_dir("ftcbf_test_output_partial");
  fs::create_directories(dir);
  CHECK_THROWS_AS(load_run(dir), PreconditionError);
  {
    std::ofstream(dir / RunFiles::kScenario) << golden_scenario_text();
    std::ofstream(dir / RunFiles::kSwitchLog) << "time,completed,entered,cycles_completed,individual_bound,composite_estimate\n";
    std::ofstream(dir / RunFiles::kTrajectory) << "t,x0_0\nnot-a-number,1\n";
  }
  CHECK_THROWS_AS(load_run(dir), PreconditionError);
  fs::remove_all(dir);
}
