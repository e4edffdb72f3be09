#include "ftcbf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "ftcbf/log.hpp"
#include "ftcbf/oracle.hpp"

namespace ftcbf::verify {

using nlohmann::json;

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Vector random_vector(Rng& rng, Eigen::Index n, double lo, double hi) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(rng, lo, hi);
  return v;
}

Matrix random_spd(Rng& rng, Eigen::Index n) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = uniform(rng, -2.0, 2.0);
  }
  Matrix p = a * a.transpose() + 0.5 * Matrix::Identity(n, n);
  return 0.5 * (p + p.transpose());
}

double gradient_error(const BarrierFunction& h, const StackedState& x) {
  const Vector g = h.gradient(x);
  const Vector fd = oracle::central_difference_gradient(h, x);
  return (g - fd).norm() / std::max(1.0, fd.norm());
}

}  // namespace

SuiteReport gradient_suite(std::uint64_t seed, std::size_t states_per_kind, bool inject_bad_gradient) {
  constexpr double kTol = 1e-5;
  Rng rng(seed);
  SuiteReport report;
  report.name = "gradient";

  const std::size_t agents = 3;
  const std::size_t dim = 2;
  const auto n = static_cast<Eigen::Index>(dim);

  using Factory = std::function<BarrierFunction(Rng&)>;
  std::vector<std::pair<std::string, Factory>> kinds = {
      {"quadratic",
       [&](Rng& r) {
         return BarrierFunction::quadratic("q", pick(r, 0, agents - 1),
                                           QuadraticRegion(random_vector(r, n, -1.5, 1.5), random_spd(r, n)));
       }},
      {"complement",
       [&](Rng& r) {
         auto inner = BarrierFunction::quadratic(
             "q", pick(r, 0, agents - 1), QuadraticRegion(random_vector(r, n, -1.5, 1.5), random_spd(r, n)));
         return BarrierFunction::complement("!q", inner, uniform(r, 0.01, 0.2));
       }},
      {"connectivity",
       [&](Rng& r) {
         const std::size_t i = pick(r, 0, agents - 1);
         const std::size_t j = (i + pick(r, 1, agents - 1)) % agents;
         return BarrierFunction::connectivity("c", {i, j}, {uniform(r, 0.0, 2.0), uniform(r, 0.0, 1.0)});
       }},
      {"custom",
       [&](Rng& r) {
         const double a = uniform(r, 0.5, 2.0);
         return BarrierFunction::custom(
             "s", [a](const StackedState& x) { return std::sin(a * x.flat()(0)) * x.flat()(1) - x.flat()(2) * x.flat()(2); },
             [a](const StackedState& x) {
               Vector g = Vector::Zero(x.flat().size());
               g(0) = a * std::cos(a * x.flat()(0)) * x.flat()(1);
               g(1) = std::sin(a * x.flat()(0));
               g(2) = -2.0 * x.flat()(2);
               return g;
             });
       }},
  };
  if (inject_bad_gradient) {
    kinds.emplace_back("injected-bad", [](Rng&) {
      return BarrierFunction::custom(
          "bad", [](const StackedState& x) { return 1.0 - x.flat().squaredNorm(); },
          [](const StackedState& x) -> Vector { return -1.0 * x.flat(); });  // should be -2x
    });
  }

  for (const auto& [kind, make] : kinds) {
    double worst = 0.0;
    std::size_t failures = 0;
    for (std::size_t s = 0; s < states_per_kind; ++s) {
      const BarrierFunction h = make(rng);
      const StackedState x(agents, dim, random_vector(rng, static_cast<Eigen::Index>(agents * dim), -2.0, 2.0));
      const double err = gradient_error(h, x);
      worst = std::max(worst, err);
      if (!(err < kTol)) ++failures;
    }
    report.cases += states_per_kind;
    report.failures += failures;
    report.worst = std::max(report.worst, worst);
    report.details[kind] = {{"states", states_per_kind}, {"failures", failures}, {"worst_relative_error", worst}};
  }
  report.passed = report.failures == 0;
  report.note = fmt::format("{} kinds, worst relative error {:.3g} (tol {:g})", kinds.size(), report.worst, kTol);
  return report;
}

SuiteReport qp_suite(std::uint64_t seed, std::size_t cases) {
  constexpr double kMatchTol = 1e-7;
  Rng rng(seed);
  SuiteReport report;
  report.name = "qp-oracle";
  double worst_distance = 0.0;
  double worst_kkt = 0.0;
  std::size_t mismatches = 0, kkt_failures = 0, nondeterministic = 0, beaten = 0, nonmonotone = 0,
              infeasible_cases = 0, infeasible_missed = 0, fallbacks = 0;

  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = pick(rng, 1, 4);
    const auto dim = static_cast<Eigen::Index>(m);
    const bool make_infeasible = c % 10 == 9;
    const std::size_t count = pick(rng, 1, make_infeasible ? 4 : 6);
    const Vector anchor = random_vector(rng, dim, -2.0, 2.0);
    QpProblem qp{{}, m, std::nullopt};
    for (std::size_t i = 0; i < count; ++i) {
      Vector a = random_vector(rng, dim, -1.0, 1.0);
      if (i > 0 && pick(rng, 0, 9) == 0) a = qp.rows.front().normal * uniform(rng, 0.5, 2.0);  // parallel rows
      const double slack = pick(rng, 0, 1) == 0 ? 0.0 : uniform(rng, 0.0, 2.0);
      qp.rows.push_back({a, a.dot(anchor) - slack, {RowKind::kInvariance, fmt::format("r{}", i)}});
    }
    if (make_infeasible) {
      const Vector a = random_vector(rng, dim, -1.0, 1.0);
      qp.rows.push_back({a, 1.0, {RowKind::kIndividualGoal, "up"}});
      qp.rows.push_back({-a, 0.0, {RowKind::kInvariance, "down"}});
    }

    const auto expected = oracle::min_norm_by_enumeration(qp.rows, m);
    const auto solution = solve(qp);
    if (solution.used_active_set_fallback) ++fallbacks;

    if (make_infeasible) {
      ++infeasible_cases;
      if (expected || solution.status != QpStatus::kInfeasible || solution.culprits.empty()) ++infeasible_missed;
      continue;
    }
    if (!expected || solution.status != QpStatus::kOptimal) {
      ++mismatches;
      continue;
    }
    const double distance = (solution.u - *expected).norm();
    worst_distance = std::max(worst_distance, distance);
    if (!(distance <= kMatchTol)) ++mismatches;

    const auto kkt = verify_kkt(qp, solution);
    worst_kkt = std::max({worst_kkt, kkt.feasibility, kkt.stationarity, kkt.complementarity, kkt.dual_sign});
    if (!kkt.within_tolerance()) ++kkt_failures;

    const auto again = solve(qp);
    if (again.u != solution.u || again.multipliers != solution.multipliers) ++nondeterministic;

    QpOptions strict;
    strict.check_dual_monotone = true;
    try {
      (void)solve(qp, strict);
    } catch (const std::logic_error&) {
      ++nonmonotone;
    }

    // Half the samples cover the ball, half crowd the solution where a
    // better point would have to be.
    const double radius = solution.u.norm();
    for (int s = 0; s < 1000 && radius > 0.0; ++s) {
      const Vector v = s % 2 == 0 ? random_vector(rng, dim, -radius, radius)
                                  : Vector(solution.u + random_vector(rng, dim, -1e-2, 1e-2) * radius);
      if (v.norm() >= radius * (1.0 - 1e-9)) continue;
      bool feasible = true;
      for (const auto& row : qp.rows) feasible = feasible && row.normal.dot(v) >= row.offset;
      if (feasible) {
        ++beaten;
        break;
      }
    }
  }

  report.cases = cases;
  report.failures = mismatches + kkt_failures + nondeterministic + beaten + nonmonotone + infeasible_missed;
  report.worst = worst_distance;
  report.passed = report.failures == 0;
  report.details = {{"oracle_mismatches", mismatches},
                    {"worst_distance", worst_distance},
                    {"kkt_failures", kkt_failures},
                    {"worst_kkt_residual", worst_kkt},
                    {"nondeterministic", nondeterministic},
                    {"beaten_by_sampling", beaten},
                    {"dual_nonmonotone", nonmonotone},
                    {"infeasible_cases", infeasible_cases},
                    {"infeasible_missed", infeasible_missed},
                    {"active_set_fallbacks", fallbacks}};
  report.note = fmt::format("{} cases, worst distance {:.3g} (tol {:g}), worst KKT residual {:.3g}", cases,
                            worst_distance, kMatchTol, worst_kkt);
  return report;
}

SuiteReport reach_time_suite(const std::vector<double>& gammas, const std::vector<double>& rhos,
                             const std::vector<double>& h0s, double dt) {
  SuiteReport report;
  report.name = "reach-time";
  report.details["runs"] = json::array();
  const auto dyn = ControlAffineDynamics::single_integrator(1, 2);
  const auto goal = BarrierFunction::quadratic("goal", 0, QuadraticRegion(Vector::Zero(2), Matrix::Identity(2, 2)))
                        .with_bound(std::nullopt);
  const ReachabilityProblem problem{"reach", CompositeGoalSpec({{goal, 1.0}}), {}};

  for (double gamma : gammas) {
    for (double rho : rhos) {
      for (double h0 : h0s) {
        const FtcbfParams params(gamma, rho);
        const double bound = reach_time_bound(h0, params);
        const double limit = bound * 1.05 + dt;
        Vector x0(2);
        x0 << std::sqrt(1.0 - h0), 0.0;
        StackedState x(1, 2, x0);
        std::optional<double> crossing;
        const auto max_steps = static_cast<std::size_t>(std::ceil(2.0 * limit / dt)) + 1;
        for (std::size_t k = 0; k <= max_steps; ++k) {
          if (goal.eval(x) >= 0.0) {
            crossing = static_cast<double>(k) * dt;
            break;
          }
          x = step(x, problem, dyn, params, dt).next;
        }
        const bool ok = crossing && *crossing <= limit;
        ++report.cases;
        if (!ok) ++report.failures;
        const double ratio = crossing ? *crossing / limit : std::numeric_limits<double>::infinity();
        report.worst = std::max(report.worst, ratio);
        report.details["runs"].push_back({{"gamma", gamma},
                                          {"rho", rho},
                                          {"h0", h0},
                                          {"bound", bound},
                                          {"crossing", crossing ? json(*crossing) : json(nullptr)},
                                          {"passed", ok}});
      }
    }
  }
  report.passed = report.failures == 0;
  report.note = fmt::format("{} runs, worst crossing / (1.05 T + dt) = {:.4f}", report.cases, report.worst);
  return report;
}

namespace {

SuiteReport invariance_impl(const ScenarioFile& file, const std::string& name, bool check_determinism) {
  constexpr double kSafetyTol = 1e-3;
  constexpr double kProgressTol = 1e-6;
  SuiteReport report;
  report.name = name;
  const BuiltScenario built = build(file);
  const SimResult result = run(built.sim, built.config);
  const double gamma = built.config.params.gamma();
  const double dt = built.config.dt;

  // Safety at every logged sample.
  double lowest = std::numeric_limits<double>::infinity();
  std::size_t unsafe = 0;
  for (std::size_t k = 0; k < result.size(); ++k) {
    for (const auto& h : built.sim.lasso.at(result.active_problem[k]).safety) {
      const double v = h.eval(result.states[k]);
      lowest = std::min(lowest, v);
      if (v < -kSafetyTol) ++unsafe;
    }
  }

  // Progress while some bounded goal is still negative.
  double worst_deficit = std::numeric_limits<double>::infinity();
  std::size_t slow = 0;
  std::size_t checked = 0;
  for (const auto& seg : segments(result)) {
    const auto& problem = built.sim.lasso.at(seg.lasso_position);
    const auto series = progress_series(result, seg, problem.goals);
    for (std::size_t k = 0; k < series.increments.size(); ++k) {
      const auto& x = result.states[seg.begin + k];
      bool pending = false;
      for (const auto& wb : problem.goals.bounded()) pending = pending || wb.barrier.eval(x) < 0.0;
      if (!pending) continue;
      ++checked;
      const double deficit = series.increments[k] - gamma * dt;
      worst_deficit = std::min(worst_deficit, deficit);
      if (deficit < -kProgressTol) ++slow;
    }
  }

  // Replay through an independent recorder.
  std::vector<TraceEntry> raw;
  for (std::size_t k = 0; k < result.size(); ++k) {
    PropositionSet set;
    for (const auto& entry : built.sim.workspace.entries()) {
      if (entry.prop.barrier.eval(result.states[k]) >= 0.0) set.insert(entry.prop.id);
    }
    raw.push_back({std::move(set), result.times[k]});
  }
  const bool trace_ok = oracle::compress_by_scan(raw) == result.trace.entries();

  const bool accepted = result.status == RunStatus::kAccepted &&
                        result.cycles_completed >= built.config.suffix_cycles_target;
  bool deterministic = true;
  if (check_determinism) deterministic = run(built.sim, built.config) == result;

  report.cases = result.size();
  report.failures = unsafe + slow + (trace_ok ? 0 : 1) + (accepted ? 0 : 1) + (deterministic ? 0 : 1);
  report.passed = report.failures == 0;
  report.worst = std::isfinite(worst_deficit) ? -worst_deficit : 0.0;
  report.details = {{"status", to_string(result.status)},
                    {"cycles_completed", result.cycles_completed},
                    {"steps", result.size()},
                    {"dt", dt},
                    {"gamma", gamma},
                    {"rho", built.config.params.rho()},
                    {"min_safety_value", std::isfinite(lowest) ? json(lowest) : json(nullptr)},
                    {"unsafe_samples", unsafe},
                    {"progress_samples", checked},
                    {"worst_progress_deficit", std::isfinite(worst_deficit) ? json(worst_deficit) : json(nullptr)},
                    {"slow_samples", slow},
                    {"trace_replay_matches", trace_ok},
                    {"deterministic", check_determinism ? json(deterministic) : json(nullptr)}};
  report.note = fmt::format("{}, {} cycles, min safety {:.4g}, worst progress deficit {:.3g}",
                            to_string(result.status), result.cycles_completed, lowest,
                            std::isfinite(worst_deficit) ? worst_deficit : 0.0);
  return report;
}

}  // namespace

SuiteReport invariance_suite(const ScenarioFile& scenario, const std::string& name) {
  return invariance_impl(scenario, name, true);
}

SuiteReport invariance_sweep(const ScenarioFile& scenario) {
  SuiteReport report;
  report.name = "invariance-sweep";
  report.details["runs"] = json::array();
  for (double gamma : {0.5, 1.0, 2.0}) {
    for (double rho : {0.0, 0.25, 0.5, 0.75}) {
      RunOverrides o;
      o.gamma = gamma;
      o.rho = rho;
      o.dt = std::min(scenario.sim.dt, 0.0025 / gamma);
      o.max_time = scenario.sim.max_time * std::max(1.0, 1.0 / gamma);
      const auto sub = invariance_impl(apply_overrides(scenario, o),
                                       fmt::format("gamma={} rho={}", gamma, rho), false);
      logger().info("sweep {}: {}", sub.name, sub.note);
      ++report.cases;
      if (!sub.passed) ++report.failures;
      report.worst = std::max(report.worst, sub.worst);
      json entry = sub.details;
      entry["passed"] = sub.passed;
      report.details["runs"].push_back(std::move(entry));
    }
  }
  report.passed = report.failures == 0;
  report.note = fmt::format("{} runs, {} failed", report.cases, report.failures);
  return report;
}

SuiteReport trace_suite(std::uint64_t seed, std::size_t cases) {
  Rng rng(seed);
  SuiteReport report;
  report.name = "trace";
  const std::vector<std::string> universe = {"p", "q", "r", "s"};
  std::size_t compress_mismatch = 0, verdict_mismatch = 0, accepted = 0;

  const auto random_set = [&](double density) {
    PropositionSet set;
    for (const auto& id : universe) {
      if (uniform(rng, 0.0, 1.0) < density) set.insert(id);
    }
    return set;
  };
  const auto random_waypoint = [&] {
    Waypoint w;
    for (const auto& id : universe) {
      const double u = uniform(rng, 0.0, 1.0);
      if (u < 0.3) {
        w.positive.insert(id);
      } else if (u < 0.5) {
        w.negative.insert(id);
      }
    }
    return w;
  };

  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t length = pick(rng, 1, 40);
    std::vector<TraceEntry> raw;
    TraceRecord trace;
    double t = 0.0;
    PropositionSet current = random_set(0.5);
    for (std::size_t k = 0; k < length; ++k) {
      if (uniform(rng, 0.0, 1.0) < 0.4) current = random_set(0.5);
      raw.push_back({current, t});
      trace.record(current, t);
      t += uniform(rng, 0.01, 1.0);
    }
    if (oracle::compress_by_scan(raw) != trace.entries()) ++compress_mismatch;

    std::vector<Waypoint> prefix(pick(rng, 0, 2));
    std::vector<Waypoint> suffix(pick(rng, 1, 3));
    for (auto& w : prefix) w = random_waypoint();
    for (auto& w : suffix) w = random_waypoint();
    const std::size_t cycles = pick(rng, 1, 3);

    std::vector<PropositionSet> sets;
    for (const auto& e : trace.entries()) sets.push_back(e.set);
    const std::size_t total = prefix.size() + cycles * suffix.size();
    const std::size_t embedded = oracle::longest_embedding(sets, prefix, suffix, cycles);
    const auto verdict = check_lasso(trace, prefix, suffix, cycles);
    bool agree = verdict.accepted == (embedded == total);
    if (verdict.accepted) {
      ++accepted;
      agree = agree && verdict.cycles_matched >= cycles && verdict.prefix_matched;
    } else {
      agree = agree && verdict.first_mismatch == embedded;
    }
    if (!agree) ++verdict_mismatch;
  }
  report.cases = cases;
  report.failures = compress_mismatch + verdict_mismatch;
  report.passed = report.failures == 0;
  report.worst = static_cast<double>(report.failures);
  report.details = {{"compression_mismatches", compress_mismatch},
                    {"verdict_mismatches", verdict_mismatch},
                    {"accepted_cases", accepted}};
  report.note = fmt::format("{} cases ({} accepted), {} disagreements", cases, accepted, report.failures);
  return report;
}

SuiteReport feasibility_suite(const ScenarioFile& scenario, std::size_t samples) {
  SuiteReport report;
  report.name = "feasibility";
  const BuiltScenario built = build(scenario);
  const SimResult result = run(built.sim, built.config);
  const auto& dyn = built.sim.dynamics;
  const auto& params = built.config.params;
  std::size_t individual_ok = 0, composite_ok = 0;
  json counterexamples = json::array();
  const std::size_t n = result.size();
  for (std::size_t i = 0; i < samples && n > 0; ++i) {
    const std::size_t k = samples == 1 ? 0 : i * (n - 1) / (samples - 1);
    const auto& x = result.states[k];
    const auto& problem = built.sim.lasso.at(result.active_problem[k]);
    const auto individual = solve({assemble_individual_rows(problem, dyn, params, x), dyn.control_dim(), std::nullopt});
    const auto composite = solve({assemble_problem_rows(problem, dyn, params, x), dyn.control_dim(), std::nullopt});
    const bool ind = individual.status == QpStatus::kOptimal;
    const bool comp = composite.status == QpStatus::kOptimal;
    individual_ok += ind ? 1 : 0;
    composite_ok += comp ? 1 : 0;
    ++report.cases;
    if (ind && !comp) {
      ++report.failures;
      std::vector<double> flat(x.flat().data(), x.flat().data() + x.flat().size());
      counterexamples.push_back({{"time", result.times[k]}, {"problem", problem.label}, {"state", flat}});
      logger().error("feasibility counterexample at t = {}: individual QP feasible, composite not", result.times[k]);
    }
  }
  report.passed = report.failures == 0 && report.cases == samples;
  report.worst = static_cast<double>(report.failures);
  report.details = {{"samples", report.cases},
                    {"run_steps", n},
                    {"individual_feasible", individual_ok},
                    {"composite_feasible", composite_ok},
                    {"counterexamples", counterexamples}};
  report.note = fmt::format("{} states: individual feasible {}, composite feasible {}, counterexamples {}",
                            report.cases, individual_ok, composite_ok, report.failures);
  return report;
}

bool Report::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteReport& s) { return s.passed; });
}

json Report::to_json() const {
  json doc = {{"passed", passed()}, {"suites", json::array()}};
  for (const auto& s : suites) {
    doc["suites"].push_back({{"name", s.name},
                             {"passed", s.passed},
                             {"cases", s.cases},
                             {"failures", s.failures},
                             {"worst", s.worst},
                             {"note", s.note},
                             {"details", s.details}});
  }
  return doc;
}

Report run_all(const Options& options) {
  const ScenarioFile scenario = options.scenario ? *options.scenario : golden_scenario();
  Report report;
  const auto add = [&](SuiteReport s) {
    logger().info("{}: {} ({})", s.name, s.passed ? "pass" : "fail", s.note);
    report.suites.push_back(std::move(s));
  };
  add(gradient_suite(options.seed, 100, options.inject_bad_gradient));
  add(qp_suite(options.seed + 1));
  add(reach_time_suite());
  add(invariance_suite(scenario));
  add(trace_suite(options.seed + 2));
  add(feasibility_suite(scenario));
  if (options.sweep) add(invariance_sweep(scenario));
  return report;
}

}  // namespace ftcbf::verify
