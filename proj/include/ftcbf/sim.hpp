#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftcbf/constraints.hpp"
#include "ftcbf/qp.hpp"
#include "ftcbf/task.hpp"

namespace ftcbf {

struct SimConfig {
  double dt = 0.01;
  double max_time = 100.0;
  FtcbfParams params{1.0, 0.5};
  double goal_switch_margin = 0.0;
  std::size_t suffix_cycles_target = 2;

  /// Throws DomainError if any field is out of range.
  void validate() const;
};

/// Everything the executive needs besides the numeric configuration.
struct SimScenario {
  Workspace workspace;
  LassoSequence lasso;
  std::vector<Waypoint> prefix_waypoints;
  std::vector<Waypoint> suffix_waypoints;
  StackedState initial;
  ControlAffineDynamics dynamics;
};

struct SwitchEvent {
  double time = 0.0;
  /// Label of the completed problem; empty for the initial entry at t = 0.
  std::string completed;
  std::string entered;
  std::size_t cycles_completed = 0;
  /// Largest finite-time bound over the entered problem's individually
  /// constrained goals, evaluated at the switch state. Absent when every goal
  /// is part of the composite constraint.
  std::optional<double> individual_bound;
  /// Diagnostic only; see composite_time_estimate.
  double composite_estimate = 0.0;

  bool operator==(const SwitchEvent&) const = default;
};

struct Violation {
  double time = 0.0;
  std::string barrier_id;
  double value = 0.0;

  bool operator==(const Violation&) const = default;
};

enum class RunStatus { kAccepted, kRejected, kTimeout, kInfeasible };

std::string to_string(RunStatus status);

struct SimResult {
  /// Aligned: controls[k] is applied at states[k] over [times[k], times[k] + dt).
  std::vector<double> times;
  std::vector<StackedState> states;
  std::vector<Vector> controls;
  /// Position in the unrolled lasso of the problem driving each sample.
  std::vector<std::size_t> active_problem;
  TraceRecord trace;
  std::vector<SwitchEvent> switch_log;
  std::vector<Violation> violation_log;
  LassoVerdict verdict;
  RunStatus status = RunStatus::kRejected;
  std::size_t cycles_completed = 0;
  /// Set when status == kInfeasible.
  std::optional<std::string> failure;
  std::vector<std::string> failure_culprits;

  std::size_t size() const { return states.size(); }
  bool operator==(const SimResult& other) const;
};

struct StepResult {
  Vector u;
  StackedState next;
};

/// Solve the control QP of `problem` at x and advance one explicit Euler step
/// with the control held constant. Throws InfeasibleError naming the
/// offending barrier ids when the QP has no solution.
StepResult step(const StackedState& x, const ReachabilityProblem& problem,
                const ControlAffineDynamics& dyn, const FtcbfParams& params, double dt);

/// Minimum-energy control for `problem` at x (the QP half of step()).
Vector control(const StackedState& x, const ReachabilityProblem& problem,
               const ControlAffineDynamics& dyn, const FtcbfParams& params);

/// Closed-loop run through the lasso. Throws PreconditionError if the initial
/// state is outside the first problem's safety set, or if a switch lands
/// outside the next problem's safety set. QP infeasibility ends the run with
/// status kInfeasible and the partial trajectory.
SimResult run(const SimScenario& scenario, const SimConfig& config);

struct ProgressSeries {
  /// sum_i a_i h_i(x_k) over the bounded goals.
  std::vector<double> values;
  /// values[k+1] - values[k].
  std::vector<double> increments;
};

ProgressSeries progress_series(std::span<const StackedState> states,
                               const CompositeGoalSpec& spec);

/// A maximal run of samples driven by the same lasso position.
struct Segment {
  std::size_t lasso_position = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last sample
};

std::vector<Segment> segments(const SimResult& result);

/// Weighted-sum series over one segment of a run, extended by the first
/// sample of the next segment so the increment into the goal is included.
ProgressSeries progress_series(const SimResult& result, const Segment& segment,
                               const CompositeGoalSpec& spec);

}  // namespace ftcbf
