#include "ftcbf/sim.hpp"

#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ftcbf/error.hpp"
#include "ftcbf/log.hpp"

namespace ftcbf {

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError(fmt::format("dt must be finite and > 0, got {}", dt));
  }
  if (!(max_time >= dt) || !std::isfinite(max_time)) {
    throw DomainError(fmt::format("max_time must be finite and >= dt, got {}", max_time));
  }
  if (!(goal_switch_margin >= 0.0)) {
    throw DomainError("goal_switch_margin must be >= 0");
  }
  if (suffix_cycles_target < 1) {
    throw DomainError("suffix_cycles_target must be >= 1");
  }
}

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::kAccepted: return "accept";
    case RunStatus::kRejected: return "reject";
    case RunStatus::kTimeout: return "timeout";
    case RunStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

bool SimResult::operator==(const SimResult& other) const {
  if (times != other.times || states != other.states ||
      controls.size() != other.controls.size() || active_problem != other.active_problem ||
      !(trace == other.trace) || switch_log != other.switch_log ||
      violation_log != other.violation_log || !(verdict == other.verdict) ||
      status != other.status || cycles_completed != other.cycles_completed ||
      failure != other.failure || failure_culprits != other.failure_culprits) {
    return false;
  }
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (controls[k].size() != other.controls[k].size() || controls[k] != other.controls[k]) {
      return false;
    }
  }
  return true;
}

Vector control(const StackedState& x, const ReachabilityProblem& problem,
               const ControlAffineDynamics& dyn, const FtcbfParams& params) {
  QpProblem qp{assemble_problem_rows(problem, dyn, params, x), dyn.control_dim(), std::nullopt};
  const auto solution = solve(qp);
  if (solution.status != QpStatus::kOptimal) {
    std::vector<std::string> ids;
    for (const auto& tag : solution.culprits) ids.push_back(tag.barrier_id);
    auto message = fmt::format("QP for '{}' {}: {} [{}]", problem.label,
                               to_string(solution.status), solution.diagnostic,
                               fmt::join(ids, ", "));
    throw InfeasibleError(message, std::move(ids));
  }
  return solution.u;
}

StepResult step(const StackedState& x, const ReachabilityProblem& problem,
                const ControlAffineDynamics& dyn, const FtcbfParams& params, double dt) {
  Vector u = control(x, problem, dyn, params);
  Vector next = x.flat() + dt * (dyn.drift(x) + dyn.actuation(x) * u);
  return {std::move(u), x.with_flat(std::move(next))};
}

namespace {

std::vector<std::string> violated_safety(const StackedState& x,
                                         const ReachabilityProblem& problem) {
  std::vector<std::string> out;
  for (const auto& h : problem.safety) {
    if (!(h.eval(x) >= 0.0)) out.push_back(fmt::format("{} = {:.6g}", h.id(), h.eval(x)));
  }
  return out;
}

SwitchEvent entry_event(double t, std::string completed, const ReachabilityProblem& next,
                        std::size_t cycles, const FtcbfParams& params, const StackedState& x) {
  SwitchEvent e;
  e.time = t;
  e.completed = std::move(completed);
  e.entered = next.label;
  e.cycles_completed = cycles;
  if (!next.goals.unbounded().empty()) {
    double bound = 0.0;
    for (const auto& h : next.goals.unbounded()) {
      bound = std::max(bound, reach_time_bound(h.eval(x), params));
    }
    e.individual_bound = bound;
  }
  e.composite_estimate = composite_time_estimate(next.goals, params, x);
  return e;
}

}  // namespace

SimResult run(const SimScenario& scenario, const SimConfig& config) {
  config.validate();
  const auto& dyn = scenario.dynamics;
  if (scenario.initial.dimension() != dyn.state_dim()) {
    throw DimensionError("initial state does not match the dynamics");
  }
  const auto& lasso = scenario.lasso;
  if (const auto bad = violated_safety(scenario.initial, lasso.at(0)); !bad.empty()) {
    throw PreconditionError(fmt::format("initial state violates the safety set of '{}': {}",
                                        lasso.at(0).label, fmt::join(bad, "; ")));
  }

  SimResult result;
  std::size_t position = 0;
  StackedState x = scenario.initial;
  result.switch_log.push_back(entry_event(0.0, "", lasso.at(0), 0, config.params, x));
  logger().info("entering '{}' at t = 0", lasso.at(0).label);

  bool finished = false;
  bool timed_out = false;
  for (std::size_t k = 0;; ++k) {
    const double t = static_cast<double>(k) * config.dt;

    while (in_goal(x, lasso.at(position), config.goal_switch_margin)) {
      const std::string completed = lasso.at(position).label;
      ++position;
      result.cycles_completed = lasso.completed_cycles(position);
      const auto& next = lasso.at(position);
      if (const auto bad = violated_safety(x, next); !bad.empty()) {
        throw PreconditionError(
            fmt::format("t = {}: goal of '{}' is not inside the safety set of '{}': {}", t,
                        completed, next.label, fmt::join(bad, "; ")));
      }
      result.switch_log.push_back(
          entry_event(t, completed, next, result.cycles_completed, config.params, x));
      logger().info("t = {:.4f}: '{}' reached, entering '{}' (cycles {})", t, completed,
                    next.label, result.cycles_completed);
      if (result.cycles_completed >= config.suffix_cycles_target) {
        finished = true;
        break;
      }
    }

    const auto& active = lasso.at(position);
    Vector u;
    try {
      u = control(x, active, dyn, config.params);
    } catch (const InfeasibleError& e) {
      logger().error("t = {:.4f}: {}", t, e.what());
      result.failure = e.what();
      result.failure_culprits = e.culprits();
      break;
    }

    for (const auto& h : active.safety) {
      const double value = h.eval(x);
      if (value < 0.0) result.violation_log.push_back({t, h.id(), value});
    }
    result.trace.record(scenario.workspace.valuation(x), t);
    result.times.push_back(t);
    result.states.push_back(x);
    result.active_problem.push_back(position);
    if (logger().should_log(spdlog::level::debug)) {
      logger().debug("t = {:.4f} x = [{}] u = [{}]", t,
                     fmt::join(x.flat().data(), x.flat().data() + x.flat().size(), ", "),
                     fmt::join(u.data(), u.data() + u.size(), ", "));
    }

    if (finished) {
      result.controls.push_back(std::move(u));
      break;
    }
    if (static_cast<double>(k + 1) * config.dt > config.max_time * (1.0 + 1e-12)) {
      result.controls.push_back(std::move(u));
      timed_out = true;
      break;
    }
    Vector next = x.flat() + config.dt * (dyn.drift(x) + dyn.actuation(x) * u);
    result.controls.push_back(std::move(u));
    x = x.with_flat(std::move(next));
  }

  result.verdict = check_lasso(result.trace, scenario.prefix_waypoints,
                               scenario.suffix_waypoints, config.suffix_cycles_target);
  if (result.failure) {
    result.status = RunStatus::kInfeasible;
  } else if (timed_out) {
    result.status = RunStatus::kTimeout;
  } else {
    result.status = result.verdict.accepted ? RunStatus::kAccepted : RunStatus::kRejected;
  }
  return result;
}

ProgressSeries progress_series(std::span<const StackedState> states,
                               const CompositeGoalSpec& spec) {
  ProgressSeries series;
  series.values.reserve(states.size());
  for (const auto& x : states) {
    double sum = 0.0;
    for (const auto& [barrier, weight] : spec.bounded()) sum += weight * barrier.eval(x);
    series.values.push_back(sum);
  }
  for (std::size_t k = 1; k < series.values.size(); ++k) {
    series.increments.push_back(series.values[k] - series.values[k - 1]);
  }
  return series;
}

std::vector<Segment> segments(const SimResult& result) {
  std::vector<Segment> out;
  for (std::size_t k = 0; k < result.active_problem.size(); ++k) {
    if (out.empty() || out.back().lasso_position != result.active_problem[k]) {
      out.push_back({result.active_problem[k], k, k + 1});
    } else {
      out.back().end = k + 1;
    }
  }
  return out;
}

ProgressSeries progress_series(const SimResult& result, const Segment& segment,
                               const CompositeGoalSpec& spec) {
  const std::size_t end = std::min(segment.end + 1, result.states.size());
  return progress_series(
      std::span<const StackedState>(result.states).subspan(segment.begin, end - segment.begin),
      spec);
}

}  // namespace ftcbf
