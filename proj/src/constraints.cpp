#include "ftcbf/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "ftcbf/error.hpp"

namespace ftcbf {

CompositeGoalSpec::CompositeGoalSpec(std::vector<WeightedBarrier> goals) {
  if (goals.empty()) {
    throw PreconditionError("goal set must contain at least one barrier");
  }
  for (auto& g : goals) {
    if (!(g.weight > 0.0) || !std::isfinite(g.weight)) {
      throw DomainError(
          fmt::format("goal '{}': weight must be finite and > 0", g.barrier.id()));
    }
    if (g.barrier.bounded_above()) {
      bounded_.push_back(std::move(g));
    } else {
      unbounded_.push_back(std::move(g.barrier));
    }
  }
}

std::vector<const BarrierFunction*> CompositeGoalSpec::all() const {
  std::vector<const BarrierFunction*> out;
  out.reserve(size());
  for (const auto& g : bounded_) out.push_back(&g.barrier);
  for (const auto& b : unbounded_) out.push_back(&b);
  return out;
}

ControlAffineDynamics::ControlAffineDynamics(std::size_t state_dim, std::size_t control_dim,
                                             DriftFn drift, ActuationFn actuation)
    : state_dim_(state_dim),
      control_dim_(control_dim),
      drift_(std::move(drift)),
      actuation_(std::move(actuation)) {
  if (state_dim_ == 0 || control_dim_ == 0) {
    throw DimensionError("dynamics need positive state and control dimensions");
  }
  if (!drift_ || !actuation_) {
    throw PreconditionError("dynamics callbacks must be set");
  }
}

ControlAffineDynamics ControlAffineDynamics::single_integrator(std::size_t agent_count,
                                                               std::size_t agent_dim) {
  const auto dim = agent_count * agent_dim;
  const auto d = static_cast<Eigen::Index>(dim);
  return ControlAffineDynamics(
      dim, dim, [d](const StackedState&) -> Vector { return Vector::Zero(d); },
      [d](const StackedState&) -> Matrix { return Matrix::Identity(d, d); });
}

Vector ControlAffineDynamics::drift(const StackedState& x) const {
  if (x.dimension() != state_dim_) {
    throw DimensionError(
        fmt::format("state has dimension {}, dynamics expect {}", x.dimension(), state_dim_));
  }
  Vector f = drift_(x);
  if (static_cast<std::size_t>(f.size()) != state_dim_) {
    throw DimensionError(fmt::format("drift returned length {}, expected {}", f.size(),
                                     state_dim_));
  }
  return f;
}

Matrix ControlAffineDynamics::actuation(const StackedState& x) const {
  if (x.dimension() != state_dim_) {
    throw DimensionError(
        fmt::format("state has dimension {}, dynamics expect {}", x.dimension(), state_dim_));
  }
  Matrix g = actuation_(x);
  if (static_cast<std::size_t>(g.rows()) != state_dim_ ||
      static_cast<std::size_t>(g.cols()) != control_dim_) {
    throw DimensionError(fmt::format("actuation returned {}x{}, expected {}x{}", g.rows(),
                                     g.cols(), state_dim_, control_dim_));
  }
  return g;
}

FtcbfParams::FtcbfParams(double gamma, double rho) : gamma_(gamma), rho_(rho) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw DomainError(fmt::format("gamma must be finite and > 0, got {}", gamma));
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw DomainError(fmt::format("rho must lie in [0, 1), got {}", rho));
  }
}

std::string to_string(RowKind kind) {
  switch (kind) {
    case RowKind::kComposite: return "composite";
    case RowKind::kIndividualGoal: return "individual-goal";
    case RowKind::kInvariance: return "invariance";
    case RowKind::kBox: return "box";
  }
  return "unknown";
}

bool ConstraintRow::pointwise_infeasible() const {
  return offset > 0.0 && normal.cwiseAbs().maxCoeff() == 0.0;
}

double ConstraintRow::slack(const Vector& u) const { return normal.dot(u) - offset; }

double sign_pow(double h, double gamma, double rho) {
  if (!(gamma > 0.0)) {
    throw DomainError(fmt::format("gamma must be > 0, got {}", gamma));
  }
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw DomainError(fmt::format("rho must lie in [0, 1), got {}", rho));
  }
  if (h == 0.0) {
    return 0.0;
  }
  const double magnitude = gamma * std::pow(std::abs(h), rho);
  return h > 0.0 ? magnitude : -magnitude;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_finite(const BarrierFunction& h, double value, const Vector& grad) {
  if (!std::isfinite(value) || !grad.allFinite()) {
    throw DomainError(fmt::format("barrier '{}' is non-finite at the current state", h.id()));
  }
}

}  // namespace

ConstraintRow individual_row(const BarrierFunction& h, const ControlAffineDynamics& dyn,
                             const FtcbfParams& params, const StackedState& x, RowKind kind) {
  const double value = h.eval(x);
  const Vector grad = h.gradient(x);
  check_finite(h, value, grad);
  ConstraintRow row;
  row.normal = dyn.actuation(x).transpose() * grad;
  row.offset = -grad.dot(dyn.drift(x)) - sign_pow(value, params.gamma(), params.rho());
  row.tag = RowTag{kind, h.id()};
  return row;
}

ConstraintRow composite_row(const CompositeGoalSpec& spec, const ControlAffineDynamics& dyn,
                            double gamma, const StackedState& x) {
  if (spec.bounded().empty()) {
    throw PreconditionError("composite row needs at least one bounded goal barrier");
  }
  if (!(gamma > 0.0)) {
    throw DomainError(fmt::format("gamma must be > 0, got {}", gamma));
  }
  const Vector f = dyn.drift(x);
  const Matrix g = dyn.actuation(x);
  Vector weighted = Vector::Zero(static_cast<Eigen::Index>(x.dimension()));
  double min_value = std::numeric_limits<double>::infinity();
  std::string ids;
  for (const auto& [barrier, weight] : spec.bounded()) {
    const double value = barrier.eval(x);
    const Vector grad = barrier.gradient(x);
    check_finite(barrier, value, grad);
    weighted += weight * grad;
    min_value = std::min(min_value, value);
    if (!ids.empty()) ids += '+';
    ids += barrier.id();
  }
  ConstraintRow row;
  row.normal = g.transpose() * weighted;
  row.offset = -weighted.dot(f) - gamma * sign(min_value);
  row.tag = RowTag{RowKind::kComposite, std::move(ids)};
  return row;
}

std::vector<ConstraintRow> assemble_problem_rows(const ReachabilityProblem& problem,
                                                 const ControlAffineDynamics& dyn,
                                                 const FtcbfParams& params,
                                                 const StackedState& x) {
  std::vector<ConstraintRow> rows;
  rows.reserve(1 + problem.goals.unbounded().size() + problem.safety.size());
  if (!problem.goals.bounded().empty()) {
    rows.push_back(composite_row(problem.goals, dyn, params.gamma(), x));
  }
  for (const auto& h : problem.goals.unbounded()) {
    rows.push_back(individual_row(h, dyn, params, x, RowKind::kIndividualGoal));
  }
  for (const auto& h : problem.safety) {
    rows.push_back(individual_row(h, dyn, params, x, RowKind::kInvariance));
  }
  return rows;
}

std::vector<ConstraintRow> assemble_individual_rows(const ReachabilityProblem& problem,
                                                    const ControlAffineDynamics& dyn,
                                                    const FtcbfParams& params,
                                                    const StackedState& x) {
  std::vector<ConstraintRow> rows;
  for (const auto* h : problem.goals.all()) {
    rows.push_back(individual_row(*h, dyn, params, x, RowKind::kIndividualGoal));
  }
  for (const auto& h : problem.safety) {
    rows.push_back(individual_row(h, dyn, params, x, RowKind::kInvariance));
  }
  return rows;
}

double reach_time_bound(double h0, const FtcbfParams& params) {
  if (h0 >= 0.0) {
    return 0.0;
  }
  const double exponent = 1.0 - params.rho();
  return std::pow(std::abs(h0), exponent) / (params.gamma() * exponent);
}

double composite_time_estimate(const CompositeGoalSpec& spec, const FtcbfParams& params,
                               const StackedState& x) {
  double individual = 0.0;
  for (const auto& h : spec.unbounded()) {
    individual = std::max(individual, reach_time_bound(h.eval(x), params));
  }
  double headroom = 0.0;
  bool pending = false;
  for (const auto& [barrier, weight] : spec.bounded()) {
    const double value = barrier.eval(x);
    pending = pending || value < 0.0;
    headroom += weight * (*barrier.bounded_above() - value);
  }
  return individual + (pending ? headroom / params.gamma() : 0.0);
}

}  // namespace ftcbf
