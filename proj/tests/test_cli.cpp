#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "ftcbf/commands.hpp"
#include "ftcbf/output.hpp"

using namespace ftcbf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ftcbf_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_json(const fs::path& dir, const json& doc) {
  const auto path = dir / "scenario.json";
  std::ofstream(path) << doc.dump(2);
  return path;
}

json golden_json() { return json::parse(golden_scenario_text()); }

// One agent sitting on the rim of the disc it must stay in, asked to reach a
// disc that lies straight outward: the two constraints point in opposite
// directions.
json infeasible_json() {
  return {
      {"name", "opposed"},
      {"agents", {{"count", 1}, {"dimension", 2}, {"initial_positions", {{1.0, 0.0}}}}},
      {"regions",
       {{{"id", "S"}, {"center", {0.0, 0.0}}, {"shape", {1.0, 0.0, 0.0, 1.0}}},
        {{"id", "G"}, {"center", {3.0, 0.0}}, {"shape", {1.0, 0.0, 0.0, 1.0}}}}},
      {"propositions",
       {{{"id", "inS"}, {"region", "S"}, {"agent", 0}}, {{"id", "inG"}, {"region", "G"}, {"agent", 0}}}},
      {"problems",
       {{{"label", "go"},
         {"a1_true", {"inS"}},
         {"a1_false", {"inG"}},
         {"a2_true", {"inS", "inG"}},
         {"a2_false", json::array()}}}},
      {"lasso", {{"prefix", json::array()}, {"suffix", {"go"}}}},
      {"sim", {{"dt", 0.01}, {"max_time", 1.0}}}};
}

int run_cmd(const fs::path& scenario, const fs::path& out, RunOverrides o, std::string* text = nullptr) {
  std::ostringstream stdout_text, stderr_text;
  const int code = cmd_run(scenario, out, o, stdout_text, stderr_text);
  if (text) *text = stdout_text.str() + stderr_text.str();
  return code;
}

int shell(const std::string& args) {
  const std::string command = std::string(FTCBF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunOverrides coarse() {
  RunOverrides o;
  o.dt = 0.01;
  return o;
}

}  // namespace

TEST_CASE("run exit codes") {
  const auto dir = scratch("codes");

  SUBCASE("accepted golden run") {
    std::string text;
    CHECK(run_cmd(write_json(dir, golden_json()), dir / "out", coarse(), &text) == kExitOk);
    CHECK(text.rfind("accept: cycles 2/2", 0) == 0);
    CHECK(fs::exists(dir / "out" / RunFiles::kSummary));
  }
  SUBCASE("robot starting inside the obstacle") {
    auto doc = golden_json();
    doc["agents"]["initial_positions"][0] = {0.0, 0.2};
    std::string text;
    CHECK(run_cmd(write_json(dir, doc), dir / "out", coarse(), &text) == kExitError);
    CHECK(text.find("!pi1O") != std::string::npos);
  }
  SUBCASE("timeout") {
    auto o = coarse();
    o.max_time = 0.01;
    std::string text;
    CHECK(run_cmd(write_json(dir, golden_json()), dir / "out", o, &text) == kExitRejected);
    CHECK(text.rfind("timeout", 0) == 0);
  }
  SUBCASE("infeasible QP") {
    std::string text;
    CHECK(run_cmd(write_json(dir, infeasible_json()), dir / "out", {}, &text) == kExitInfeasible);
    CHECK(text.find("inG") != std::string::npos);
    CHECK(text.find("inS") != std::string::npos);
    const auto summary = json::parse(std::ifstream(dir / "out" / RunFiles::kSummary));
    CHECK(summary["status"] == "infeasible");
  }
  SUBCASE("schema error") {
    auto doc = golden_json();
    doc["params"]["rho"] = 2.0;
    std::string text;
    CHECK(run_cmd(write_json(dir, doc), dir / "out", {}, &text) == kExitError);
    CHECK(text.find("/params/rho") != std::string::npos);
  }
  SUBCASE("missing scenario file") {
    CHECK(run_cmd(dir / "absent.json", dir / "out", {}) == kExitError);
  }
  SUBCASE("bad override") {
    auto o = coarse();
    o.gamma = -1.0;
    CHECK(run_cmd(write_json(dir, golden_json()), dir / "out", o) == kExitError);
  }
}

TEST_CASE("progress command") {
  const auto dir = scratch("progress");
  std::ostringstream out, err;
  CHECK(cmd_progress(dir, out, err) == kExitError);
  CHECK(err.str().find("missing") != std::string::npos);

  REQUIRE(run_cmd(write_json(dir, golden_json()), dir / "run", coarse()) == kExitOk);
  std::ostringstream out2, err2;
  CHECK(cmd_progress(dir / "run", out2, err2) == kExitOk);
  CHECK(out2.str().rfind("progress: ", 0) == 0);
  CHECK(fs::exists(dir / "run" / RunFiles::kProgressCsv));
  CHECK(fs::exists(dir / "run" / RunFiles::kProgressSvg));
}

TEST_CASE("verify fails on an injected gradient bug") {
  VerifyArgs args;
  args.inject_bad_gradient = true;
  std::ostringstream out, err;
  CHECK(cmd_verify(args, out, err) == kExitError);
  CHECK(out.str().find("gradient") != std::string::npos);
  CHECK(out.str().find("FAIL") != std::string::npos);
}

TEST_CASE("binary") {
  const auto dir = scratch("binary");
  const auto golden = write_json(dir, golden_json()).string();
  CHECK(shell("--help") == 0);
  CHECK(shell("") == kExitError);
  CHECK(shell("run") == kExitError);
  CHECK(shell("run " + golden + " --dt nope") == kExitError);
  CHECK(shell("run " + golden + " --dt 0.01 -o " + (dir / "out").string()) == kExitOk);
  CHECK(shell("run " + golden + " --dt 0.01 --max-time 0.01 -o " + (dir / "t").string()) == kExitRejected);
  CHECK(shell("progress " + (dir / "out").string()) == kExitOk);
  CHECK(shell("progress " + (dir / "empty").string()) == kExitError);
  const auto infeasible = scratch("binary_infeasible");
  CHECK(shell("run " + write_json(infeasible, infeasible_json()).string() + " -o " +
              (infeasible / "out").string()) == kExitInfeasible);
}
