#pragma once

// Reference computations used to cross-check the production code paths. Each
// one is deliberately naive: brute force, enumeration or finite differences.

#include <functional>
#include <optional>
#include <vector>

#include "ftcbf/constraints.hpp"
#include "ftcbf/task.hpp"

namespace ftcbf::oracle {

/// Central differences of f at x with the given step.
Vector central_difference_gradient(const std::function<double(const Vector&)>& f,
                                   const Vector& x, double step = 1e-6);

/// Same, for a barrier over a stacked state.
Vector central_difference_gradient(const BarrierFunction& h, const StackedState& x,
                                   double step = 1e-6);

/// Minimum-norm point of {u : a_i . u >= b_i} by trying every subset of rows
/// as the active set (SVD least-norm solve per subset) and keeping the
/// feasible candidate of smallest norm. nullopt if no candidate is feasible.
std::optional<Vector> min_norm_by_enumeration(const std::vector<ConstraintRow>& rows,
                                              std::size_t dim, double feasibility_tol = 1e-9);

/// grad_h . (f + g u) + gamma sign(h) |h|^rho, evaluated without building a row.
double cbf_condition(const BarrierFunction& h, const ControlAffineDynamics& dyn,
                     const FtcbfParams& params, const StackedState& x, const Vector& u);

/// Drops entries equal to their predecessor.
std::vector<TraceEntry> compress_by_scan(const std::vector<TraceEntry>& samples);

/// Longest j such that the first j waypoints of prefix + suffix^cycles embed
/// as a subsequence of `sets` (exhaustive search over embeddings).
std::size_t longest_embedding(const std::vector<PropositionSet>& sets,
                              const std::vector<Waypoint>& prefix,
                              const std::vector<Waypoint>& suffix, std::size_t cycles);

}  // namespace ftcbf::oracle
