#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ftcbf/barrier.hpp"
#include "ftcbf/problem.hpp"

namespace ftcbf {

/// x_dot = f(x) + g(x) u.
class ControlAffineDynamics {
 public:
  using DriftFn = std::function<Vector(const StackedState&)>;
  using ActuationFn = std::function<Matrix(const StackedState&)>;

  ControlAffineDynamics(std::size_t state_dim, std::size_t control_dim, DriftFn drift,
                        ActuationFn actuation);

  /// f = 0, g = I for N agents of dimension n.
  static ControlAffineDynamics single_integrator(std::size_t agent_count, std::size_t agent_dim);

  /// Both throw DimensionError when a callback returns the wrong shape.
  Vector drift(const StackedState& x) const;
  Matrix actuation(const StackedState& x) const;

  std::size_t state_dim() const { return state_dim_; }
  std::size_t control_dim() const { return control_dim_; }

 private:
  std::size_t state_dim_;
  std::size_t control_dim_;
  DriftFn drift_;
  ActuationFn actuation_;
};

class FtcbfParams {
 public:
  /// Throws DomainError unless gamma > 0 and 0 <= rho < 1.
  FtcbfParams(double gamma, double rho);

  double gamma() const { return gamma_; }
  double rho() const { return rho_; }

  bool operator==(const FtcbfParams&) const = default;

 private:
  double gamma_;
  double rho_;
};

enum class RowKind { kComposite, kIndividualGoal, kInvariance, kBox };

struct RowTag {
  RowKind kind = RowKind::kIndividualGoal;
  /// Barrier id; for composite rows the goal ids joined by '+'.
  std::string barrier_id;

  bool operator==(const RowTag&) const = default;
};

std::string to_string(RowKind kind);

/// normal . u >= offset.
struct ConstraintRow {
  Vector normal;
  double offset = 0.0;
  RowTag tag;

  /// Zero normal with positive offset: no control satisfies the row.
  bool pointwise_infeasible() const;

  /// normal . u - offset (>= 0 when satisfied).
  double slack(const Vector& u) const;
};

/// gamma * sign(h) * |h|^rho, with the result exactly 0 at h = 0 (also for rho = 0).
double sign_pow(double h, double gamma, double rho);

/// Finite-time CBF condition of one barrier as a row on u:
///   grad_h^T g u >= -grad_h^T f - sign_pow(h).
/// Throws DomainError if h or its gradient is non-finite.
ConstraintRow individual_row(const BarrierFunction& h, const ControlAffineDynamics& dyn,
                             const FtcbfParams& params, const StackedState& x,
                             RowKind kind = RowKind::kIndividualGoal);

/// Composite condition over the bounded goals:
///   sum_i a_i grad_h_i^T g u >= -sum_i a_i grad_h_i^T f - gamma * sign(min_i h_i).
/// There is no |.|^rho factor on the sign term. Throws PreconditionError when
/// the spec has no bounded goals.
ConstraintRow composite_row(const CompositeGoalSpec& spec, const ControlAffineDynamics& dyn,
                            double gamma, const StackedState& x);

/// One composite row (when any bounded goal exists), one individual row per
/// unbounded goal, then one invariance row per safety barrier.
std::vector<ConstraintRow> assemble_problem_rows(const ReachabilityProblem& problem,
                                                 const ControlAffineDynamics& dyn,
                                                 const FtcbfParams& params,
                                                 const StackedState& x);

/// Same problem with every goal constrained individually (q' = 0).
std::vector<ConstraintRow> assemble_individual_rows(const ReachabilityProblem& problem,
                                                    const ControlAffineDynamics& dyn,
                                                    const FtcbfParams& params,
                                                    const StackedState& x);

/// |h0|^(1-rho) / (gamma (1-rho)); 0 when h0 >= 0.
double reach_time_bound(double h0, const FtcbfParams& params);

/// Rough time-to-goal for a mixed goal set evaluated at x: the largest
/// individual bound over unbounded goals, plus (sum a_i M_i - sum a_i h_i(x)) / gamma
/// for the bounded ones. The composite term uses h at x rather than at the
/// time the unbounded goals are met, so this is an estimate, not a bound.
double composite_time_estimate(const CompositeGoalSpec& spec, const FtcbfParams& params,
                               const StackedState& x);

}  // namespace ftcbf
