#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ftcbf/scenario.hpp"

namespace ftcbf::verify {

struct SuiteReport {
  std::string name;
  bool passed = false;
  std::size_t cases = 0;
  std::size_t failures = 0;
  /// Largest residual against the suite's own tolerance (meaning varies per suite).
  double worst = 0.0;
  std::string note;
  nlohmann::json details = nlohmann::json::object();
};

/// Finite-difference check of every barrier kind on random states,
/// relative error ||g - g_fd|| / max(1, ||g_fd||) < 1e-5.
/// `inject_bad_gradient` adds a custom barrier with a wrong gradient.
SuiteReport gradient_suite(std::uint64_t seed, std::size_t states_per_kind = 100,
                           bool inject_bad_gradient = false);

/// Random small QPs against min_norm_by_enumeration: solution distance
/// <= 1e-7, KKT residuals, bit-identical resolves, rejection-sampled
/// optimality and monotone dual ascent. Every tenth case is infeasible by
/// construction and must be reported as such.
SuiteReport qp_suite(std::uint64_t seed, std::size_t cases = 500);

/// Single agent, goal 1 - ||x||^2 >= 0 with the bound cleared so the
/// individual constraint applies. Crossing time <= T * 1.05 + dt for every
/// gamma x rho x h0 in the grid.
SuiteReport reach_time_suite(const std::vector<double>& gammas = {0.5, 1.0, 2.0},
                             const std::vector<double>& rhos = {0.0, 0.25, 0.5, 0.75},
                             const std::vector<double>& h0s = {-0.5, -1.0, -3.0},
                             double dt = 1e-3);

/// Safety >= -1e-3, pre-goal progress increments >= gamma dt - 1e-6, lasso
/// acceptance, trace replay through an independent recorder, and
/// bit-identical reruns.
SuiteReport invariance_suite(const ScenarioFile& scenario, const std::string& name = "invariance");

/// invariance_suite over gamma x rho; dt is shrunk to 0.0025 / gamma where
/// the file's dt is coarser.
SuiteReport invariance_sweep(const ScenarioFile& scenario);

/// Compression and check_lasso against the brute-force oracles on random traces.
SuiteReport trace_suite(std::uint64_t seed, std::size_t cases = 1000);

/// At states sampled along a run: individual-rows QP feasible implies the
/// composite QP is feasible. Counterexample states are listed in details.
SuiteReport feasibility_suite(const ScenarioFile& scenario, std::size_t samples = 1000);

struct Options {
  std::optional<ScenarioFile> scenario;  // golden when absent
  bool sweep = false;
  bool inject_bad_gradient = false;
  std::uint64_t seed = 20260101;
};

struct Report {
  std::vector<SuiteReport> suites;
  bool passed() const;
  nlohmann::json to_json() const;
};

Report run_all(const Options& options);

}  // namespace ftcbf::verify
