#pragma once

#include <string>
#include <vector>

#include "ftcbf/barrier.hpp"

namespace ftcbf {

struct WeightedBarrier {
  BarrierFunction barrier;
  double weight = 1.0;
};

/// Goal side of a reachability problem. Barriers that declare an upper bound
/// are combined into one composite constraint; the rest get individual rows.
class CompositeGoalSpec {
 public:
  /// Split `goals` by their bounded_above metadata. Throws PreconditionError
  /// if `goals` is empty and DomainError on a non-positive weight.
  explicit CompositeGoalSpec(std::vector<WeightedBarrier> goals);

  const std::vector<WeightedBarrier>& bounded() const { return bounded_; }
  const std::vector<BarrierFunction>& unbounded() const { return unbounded_; }

  std::size_t size() const { return bounded_.size() + unbounded_.size(); }

  /// Bounded and unbounded goals, in that order.
  std::vector<const BarrierFunction*> all() const;

 private:
  std::vector<WeightedBarrier> bounded_;
  std::vector<BarrierFunction> unbounded_;
};

/// Reach {all goal barriers >= 0} while keeping every safety barrier >= 0.
/// Safety barriers are already in >= 0 form (complements applied).
struct ReachabilityProblem {
  std::string label;
  CompositeGoalSpec goals;
  std::vector<BarrierFunction> safety;
};

}  // namespace ftcbf
