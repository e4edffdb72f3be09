#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ftcbf/constraints.hpp"

namespace ftcbf {

/// Per-coordinate limits lower <= u <= upper.
struct BoxBounds {
  Vector lower;
  Vector upper;
};

/// min ||u||^2  s.t.  rows[i].normal . u >= rows[i].offset.
struct QpProblem {
  std::vector<ConstraintRow> rows;
  std::size_t dim = 0;
  std::optional<BoxBounds> bounds;
};

enum class QpStatus { kOptimal, kInfeasible, kMaxIterations };

std::string to_string(QpStatus status);

struct QpSolution {
  Vector u;
  /// One multiplier per row of expanded_rows(problem), with u = sum_i lambda_i a_i.
  std::vector<double> multipliers;
  QpStatus status = QpStatus::kMaxIterations;
  /// Human-readable reason when not optimal.
  std::string diagnostic;
  /// Rows implicated in infeasibility.
  std::vector<RowTag> culprits;
  /// Hildreth sweeps performed.
  int sweeps = 0;
  /// True when the exact dual active-set pass produced the answer.
  bool used_active_set_fallback = false;
};

struct QpOptions {
  int max_sweeps = 10000;
  double dual_tolerance = 1e-10;
  double divergence_limit = 1e12;
  /// Throws std::logic_error if a Hildreth update ever decreases the dual objective.
  bool check_dual_monotone = false;
};

/// Problem rows followed by two rows per box-bounded coordinate.
std::vector<ConstraintRow> expanded_rows(const QpProblem& problem);

/// Deterministic: identical problems give bit-identical solutions.
QpSolution solve(const QpProblem& problem, const QpOptions& options = {});

struct KktReport {
  /// max_i max(0, b_i - a_i . u)
  double feasibility = 0.0;
  /// ||u - sum_i lambda_i a_i||
  double stationarity = 0.0;
  /// max_i |lambda_i (a_i . u - b_i)|
  double complementarity = 0.0;
  /// max_i max(0, -lambda_i)
  double dual_sign = 0.0;

  bool within_tolerance(double feasibility_tol = 1e-8, double stationarity_tol = 1e-8,
                        double complementarity_tol = 1e-6) const;
};

/// Recomputes the KKT residuals of `solution` against the expanded rows.
KktReport verify_kkt(const QpProblem& problem, const QpSolution& solution);

}  // namespace ftcbf
