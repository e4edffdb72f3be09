#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "ftcbf/error.hpp"
#include "ftcbf/scenario.hpp"
#include "ftcbf/sim.hpp"
#include "support.hpp"

using namespace ftcbf;
using test::ball;
using test::state;
using test::vec;

namespace {

// h = sign * x + shift on a single scalar agent.
BarrierFunction line(std::string id, double sign, double shift) {
  return BarrierFunction::custom(
      std::move(id), [=](const StackedState& x) { return sign * x.flat()(0) + shift; },
      [=](const StackedState& x) {
        Vector g = Vector::Zero(x.dimension());
        g(0) = sign;
        return g;
      });
}

ReachabilityProblem single(std::string label, BarrierFunction goal,
                           std::vector<BarrierFunction> safety = {}) {
  return {std::move(label), CompositeGoalSpec({{std::move(goal), 1.0}}), std::move(safety)};
}

// One agent in the plane that has to reach the unit disc.
SimScenario disc_scenario(Vector start, bool bounded) {
  Workspace ws;
  auto h = BarrierFunction::quadratic("g", 0, ball({0, 0}));
  if (!bounded) h = h.with_bound(std::nullopt);
  ws.add({"g", h});
  const InducedProblemSpec spec{"reach", {}, {}, {"g"}, {}};
  return {ws,
          LassoSequence({}, {induce_problem(spec, ws)}),
          {},
          {waypoint_of(spec)},
          StackedState(1, 2, std::move(start)),
          ControlAffineDynamics::single_integrator(1, 2)};
}

SimConfig config(double dt, double max_time, std::size_t cycles = 1) {
  SimConfig c;
  c.dt = dt;
  c.max_time = max_time;
  c.suffix_cycles_target = cycles;
  return c;
}

RunOverrides with_dt(double dt) {
  RunOverrides o;
  o.dt = dt;
  return o;
}

}  // namespace

TEST_CASE("zero control at the goal center") {
  const auto ws_problem = single("p", BarrierFunction::quadratic("g", 0, ball({0.5, -0.5})));
  const auto dyn = ControlAffineDynamics::single_integrator(1, 2);
  const auto u = control(state(1, 2, {0.5, -0.5}), ws_problem, dyn, FtcbfParams(1.0, 0.5));
  CHECK(u.norm() == 0.0);
}

TEST_CASE("one step on a scalar line") {
  const auto p = single("p", line("h", -1.0, 0.0));
  const auto dyn = ControlAffineDynamics::single_integrator(1, 1);
  const double dt = 0.01;
  const auto r = step(state(1, 1, {1.0}), p, dyn, FtcbfParams(1.0, 0.5), dt);
  CHECK(r.u(0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(r.next.flat()(0) == doctest::Approx(1.0 - dt).epsilon(1e-12));
}

TEST_CASE("contradictory rows raise InfeasibleError naming both barriers") {
  // The goal pushes left at unit rate while the safety barrier is tight and
  // forbids moving left at all.
  const auto p = single("p", line("left", -1.0, 0.0), {line("wall", 1.0, -1.0)});
  const auto dyn = ControlAffineDynamics::single_integrator(1, 1);
  try {
    (void)step(state(1, 1, {1.0}), p, dyn, FtcbfParams(1.0, 0.5), 0.01);
    FAIL("expected InfeasibleError");
  } catch (const InfeasibleError& e) {
    const auto& c = e.culprits();
    CHECK(std::find(c.begin(), c.end(), "left") != c.end());
    CHECK(std::find(c.begin(), c.end(), "wall") != c.end());
  }
}

TEST_CASE("infeasibility ends a run with the partial trajectory") {
  Workspace ws;
  ws.add({"left", line("left", -1.0, 0.0)});
  ws.add({"wall", line("wall", 1.0, -1.0)});
  const auto p = single("p", line("left", -1.0, 0.0), {line("wall", 1.0, -1.0)});
  SimScenario s{ws, LassoSequence({}, {p}), {}, {Waypoint{{"left"}, {}}},
                state(1, 1, {1.0}), ControlAffineDynamics::single_integrator(1, 1)};
  const auto r = run(s, config(0.01, 1.0));
  CHECK(r.status == RunStatus::kInfeasible);
  REQUIRE(r.failure.has_value());
  CHECK(r.failure_culprits.size() >= 2);
  CHECK(r.states.empty());
}

TEST_CASE("a single goal is reached within the finite-time bound") {
  // h0 = 1 - 2 = -1, gamma 1, rho 0.5 gives T = 2.
  const double dt = 1e-3;
  const auto s = disc_scenario(vec({std::sqrt(2.0), 0.0}), false);
  const auto r = run(s, config(dt, 10.0));
  CHECK(r.status == RunStatus::kAccepted);
  REQUIRE(r.switch_log.size() == 2);
  const double bound = reach_time_bound(-1.0, FtcbfParams(1.0, 0.5));
  CHECK(bound == doctest::Approx(2.0));
  CHECK(r.switch_log[1].time <= 1.05 * bound + dt);
  CHECK(r.switch_log[1].time > 0.5 * bound);
  REQUIRE(r.switch_log[0].individual_bound.has_value());
  CHECK(*r.switch_log[0].individual_bound == doctest::Approx(2.0));
}

TEST_CASE("initial safety violation is rejected") {
  const auto p = single("p", line("left", -1.0, 0.0), {line("wall", 1.0, -1.0)});
  Workspace ws;
  ws.add({"left", line("left", -1.0, 0.0)});
  SimScenario s{ws, LassoSequence({}, {p}), {}, {Waypoint{{"left"}, {}}},
                state(1, 1, {0.5}), ControlAffineDynamics::single_integrator(1, 1)};
  CHECK_THROWS_AS(run(s, config(0.01, 1.0)), PreconditionError);
}

TEST_CASE("run arrays stay aligned") {
  const auto r = run(disc_scenario(vec({1.8, 0.3}), true), config(0.01, 10.0));
  CHECK(r.status == RunStatus::kAccepted);
  CHECK(r.times.size() == r.states.size());
  CHECK(r.controls.size() == r.states.size());
  CHECK(r.active_problem.size() == r.states.size());
  CHECK(r.trace.sample_count() == r.states.size());
  for (std::size_t k = 1; k < r.times.size(); ++k) CHECK(r.times[k] > r.times[k - 1]);
  CHECK(r.violation_log.empty());
}

TEST_CASE("progress series") {
  const CompositeGoalSpec spec({{BarrierFunction::quadratic("g", 0, ball({0, 0})), 2.0}});
  SUBCASE("flat at the goal") {
    const std::vector<StackedState> xs(5, state(1, 2, {0, 0}));
    const auto p = progress_series(xs, spec);
    CHECK(p.values.size() == 5);
    CHECK(p.increments.size() == 4);
    for (double v : p.values) CHECK(v == 2.0);
    for (double d : p.increments) CHECK(d == 0.0);
  }
  SUBCASE("increments along a closed-loop run") {
    const double dt = 0.005;
    const auto r = run(disc_scenario(vec({1.5, -1.0}), true), config(dt, 10.0));
    REQUIRE(r.status == RunStatus::kAccepted);
    const auto segs = segments(r);
    // The closing sample belongs to the next lasso position.
    REQUIRE(segs.size() == 2);
    CHECK(segs[1].end - segs[1].begin == 1);
    const auto p = progress_series(r, segs[0], spec);
    CHECK(p.values.size() == r.states.size());
    // Weighted composite: each step advances by at least gamma dt up to
    // discretisation error.
    for (std::size_t k = 0; k < p.increments.size(); ++k) {
      if (p.values[k] < 0.0) CHECK(p.increments[k] >= 1.0 * dt - 1e-6);
    }
  }
}

TEST_CASE("runs are deterministic") {
  const auto built = build(apply_overrides(golden_scenario(), with_dt(0.01)));
  const auto a = run(built.sim, built.config);
  const auto b = run(built.sim, built.config);
  CHECK(a == b);
  CHECK(a.status == RunStatus::kAccepted);
}

TEST_CASE("timeout") {
  const auto r = run(disc_scenario(vec({1.8, 0.3}), true), config(0.01, 0.05));
  CHECK(r.status == RunStatus::kTimeout);
  CHECK(r.states.size() == 6);
  CHECK_FALSE(r.verdict.accepted);
}

TEST_CASE("halving dt does not change the verdict") {
  const auto base = golden_scenario();
  const auto coarse = build(apply_overrides(base, with_dt(0.01)));
  const auto fine = build(apply_overrides(base, with_dt(0.005)));
  const auto a = run(coarse.sim, coarse.config);
  const auto b = run(fine.sim, fine.config);
  CHECK(a.status == b.status);
  CHECK(a.verdict.accepted == b.verdict.accepted);
  CHECK(a.cycles_completed == b.cycles_completed);
  CHECK(a.switch_log.size() == b.switch_log.size());
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(config(0.0, 1.0).validate(), DomainError);
  CHECK_THROWS_AS(config(0.1, 0.01).validate(), DomainError);
  CHECK_THROWS_AS(config(0.1, 1.0, 0).validate(), DomainError);
  auto c = config(0.1, 1.0);
  c.goal_switch_margin = -1.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  CHECK(to_string(RunStatus::kTimeout) == "timeout");
}
