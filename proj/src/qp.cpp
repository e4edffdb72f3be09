#include "ftcbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "ftcbf/error.hpp"

namespace ftcbf {

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIterations: return "max-iterations";
  }
  return "unknown";
}

std::vector<ConstraintRow> expanded_rows(const QpProblem& problem) {
  std::vector<ConstraintRow> rows = problem.rows;
  for (const auto& row : rows) {
    if (static_cast<std::size_t>(row.normal.size()) != problem.dim) {
      throw DimensionError(fmt::format("row '{}' has length {}, problem dimension is {}",
                                       row.tag.barrier_id, row.normal.size(), problem.dim));
    }
    if (!row.normal.allFinite() || !std::isfinite(row.offset)) {
      throw DomainError(fmt::format("row '{}' has non-finite entries", row.tag.barrier_id));
    }
  }
  if (problem.bounds) {
    const auto& box = *problem.bounds;
    if (static_cast<std::size_t>(box.lower.size()) != problem.dim ||
        static_cast<std::size_t>(box.upper.size()) != problem.dim) {
      throw DimensionError("box bounds do not match the problem dimension");
    }
    const auto m = static_cast<Eigen::Index>(problem.dim);
    for (Eigen::Index k = 0; k < m; ++k) {
      if (std::isfinite(box.lower(k))) {
        ConstraintRow lo{Vector::Unit(m, k), box.lower(k), {RowKind::kBox, fmt::format("u[{}]>=", k)}};
        rows.push_back(std::move(lo));
      }
      if (std::isfinite(box.upper(k))) {
        ConstraintRow hi{-Vector::Unit(m, k), -box.upper(k), {RowKind::kBox, fmt::format("u[{}]<=", k)}};
        rows.push_back(std::move(hi));
      }
    }
  }
  return rows;
}

namespace {

struct Rows {
  Matrix a;  // one row per constraint
  Vector b;
  Vector norm2;
};

Rows pack(const std::vector<ConstraintRow>& rows, std::size_t dim) {
  const auto k = static_cast<Eigen::Index>(rows.size());
  Rows out{Matrix(k, static_cast<Eigen::Index>(dim)), Vector(k), Vector(k)};
  for (Eigen::Index i = 0; i < k; ++i) {
    out.a.row(i) = rows[static_cast<std::size_t>(i)].normal.transpose();
    out.b(i) = rows[static_cast<std::size_t>(i)].offset;
    out.norm2(i) = out.a.row(i).squaredNorm();
  }
  return out;
}

double dual_objective(const Rows& r, const Vector& lambda) {
  return r.b.dot(lambda) - 0.5 * (r.a.transpose() * lambda).squaredNorm();
}

double feasibility_slop(const Rows& r, Eigen::Index i, const Vector& u) {
  return 1e-12 * std::max({1.0, std::sqrt(r.norm2(i)) * u.norm(), std::abs(r.b(i))});
}

bool primal_feasible(const Rows& r, const Vector& u) {
  for (Eigen::Index i = 0; i < r.b.size(); ++i) {
    if (r.a.row(i).dot(u) - r.b(i) < -feasibility_slop(r, i, u)) return false;
  }
  return true;
}

// Exact least-norm solve on the rows Hildreth left with positive multipliers.
std::optional<Vector> refine_active_set(const Rows& r, const Vector& hildreth_lambda,
                                        Vector& lambda_out) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < hildreth_lambda.size(); ++i) {
    if (hildreth_lambda(i) > 0.0) active.push_back(i);
  }
  const auto m = r.a.cols();
  if (active.empty()) {
    Vector u = Vector::Zero(m);
    if (!primal_feasible(r, u)) return std::nullopt;
    lambda_out = Vector::Zero(r.b.size());
    return u;
  }
  const auto k = static_cast<Eigen::Index>(active.size());
  Matrix as(k, m);
  Vector bs(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    as.row(j) = r.a.row(active[static_cast<std::size_t>(j)]);
    bs(j) = r.b(active[static_cast<std::size_t>(j)]);
  }
  const Matrix gram = as * as.transpose();
  const Vector mu = gram.completeOrthogonalDecomposition().solve(bs);
  const Vector u = as.transpose() * mu;
  const double scale = std::max(1.0, mu.cwiseAbs().maxCoeff());
  if (!mu.allFinite() || mu.minCoeff() < -1e-12 * scale) return std::nullopt;
  if ((as * u - bs).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, bs.cwiseAbs().maxCoeff())) {
    return std::nullopt;
  }
  if (!primal_feasible(r, u)) return std::nullopt;
  lambda_out = Vector::Zero(r.b.size());
  for (Eigen::Index j = 0; j < k; ++j) {
    lambda_out(active[static_cast<std::size_t>(j)]) = std::max(0.0, mu(j));
  }
  return u;
}

struct ActiveSetResult {
  QpStatus status;
  Vector u;
  Vector lambda;
  std::vector<Eigen::Index> culprits;
};

// Dual active-set method (Goldfarb-Idnani) specialised to the identity Hessian.
// Active rows are kept linearly independent, so each least-squares solve is
// well posed.
ActiveSetResult dual_active_set(const Rows& r) {
  const auto m = r.a.cols();
  const auto rows = r.b.size();
  Vector u = Vector::Zero(m);
  Vector lambda = Vector::Zero(rows);
  std::vector<Eigen::Index> active;
  const int max_iterations = 50 * static_cast<int>(rows + m) + 100;

  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::Index p = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      if (r.norm2(i) == 0.0) continue;
      if (std::find(active.begin(), active.end(), i) != active.end()) continue;
      const double violation = (r.b(i) - r.a.row(i).dot(u)) / std::sqrt(r.norm2(i));
      if (violation > worst && violation > feasibility_slop(r, i, u)) {
        worst = violation;
        p = i;
      }
    }
    if (p < 0) {
      return {QpStatus::kOptimal, u, lambda, {}};
    }

    const Vector ap = r.a.row(p).transpose();
    for (; iter < max_iterations; ++iter) {
      const auto k = static_cast<Eigen::Index>(active.size());
      Vector step_dual = Vector::Zero(k);
      Vector z = ap;
      if (k > 0) {
        Matrix n(m, k);
        for (Eigen::Index j = 0; j < k; ++j) {
          n.col(j) = r.a.row(active[static_cast<std::size_t>(j)]).transpose();
        }
        step_dual = n.householderQr().solve(ap);
        z = ap - n * step_dual;
      }
      double t_dual = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (step_dual(j) > 1e-14) {
          const double ratio = lambda(active[static_cast<std::size_t>(j)]) / step_dual(j);
          if (ratio < t_dual) {
            t_dual = ratio;
            drop = j;
          }
        }
      }
      const double zz = z.squaredNorm();
      const double t_primal = zz > 1e-18 * r.norm2(p)
                                  ? (r.b(p) - ap.dot(u)) / zz
                                  : std::numeric_limits<double>::infinity();
      const double t = std::min(t_dual, t_primal);
      if (!std::isfinite(t)) {
        std::vector<Eigen::Index> culprits{p};
        for (Eigen::Index j = 0; j < k; ++j) {
          if (step_dual(j) != 0.0) culprits.push_back(active[static_cast<std::size_t>(j)]);
        }
        std::sort(culprits.begin(), culprits.end());
        return {QpStatus::kInfeasible, u, lambda, culprits};
      }
      if (std::isfinite(t_primal)) u += t * z;
      for (Eigen::Index j = 0; j < k; ++j) {
        lambda(active[static_cast<std::size_t>(j)]) -= t * step_dual(j);
      }
      lambda(p) += t;
      if (t_primal <= t_dual) {
        active.push_back(p);
        break;
      }
      lambda(active[static_cast<std::size_t>(drop)]) = 0.0;
      active.erase(active.begin() + drop);
    }
  }
  return {QpStatus::kMaxIterations, u, lambda, {}};
}

void set_multipliers(QpSolution& s, const Vector& lambda) {
  s.multipliers.assign(lambda.data(), lambda.data() + lambda.size());
  for (auto& l : s.multipliers) l = std::max(0.0, l);
}

}  // namespace

QpSolution solve(const QpProblem& problem, const QpOptions& options) {
  if (problem.dim == 0) {
    throw DimensionError("QP dimension must be >= 1");
  }
  const auto rows = expanded_rows(problem);
  const auto m = static_cast<Eigen::Index>(problem.dim);
  QpSolution solution;
  solution.u = Vector::Zero(m);
  solution.multipliers.assign(rows.size(), 0.0);

  for (const auto& row : rows) {
    if (row.pointwise_infeasible()) {
      solution.culprits.push_back(row.tag);
    }
  }
  if (!solution.culprits.empty()) {
    solution.status = QpStatus::kInfeasible;
    solution.diagnostic = "row with zero normal and positive offset";
    return solution;
  }
  if (rows.empty()) {
    solution.status = QpStatus::kOptimal;
    return solution;
  }

  const Rows r = pack(rows, problem.dim);
  Vector lambda = Vector::Zero(r.b.size());
  Vector u = Vector::Zero(m);
  bool converged = false;
  bool diverged = false;
  double previous_dual = 0.0;
  for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    solution.sweeps = sweep;
    double largest_change = 0.0;
    for (Eigen::Index i = 0; i < r.b.size(); ++i) {
      if (r.norm2(i) == 0.0) continue;
      const double residual = r.b(i) - r.a.row(i).dot(u);
      const double change = std::max(-lambda(i), residual / r.norm2(i));
      lambda(i) += change;
      u += change * r.a.row(i).transpose();
      largest_change = std::max(largest_change, std::abs(change));
      if (options.check_dual_monotone) {
        const double dual = dual_objective(r, lambda);
        if (dual < previous_dual - 1e-9 * std::max(1.0, std::abs(previous_dual))) {
          throw std::logic_error(fmt::format(
              "dual objective decreased from {} to {} at sweep {}", previous_dual, dual, sweep));
        }
        previous_dual = dual;
      }
    }
    if (lambda.norm() > options.divergence_limit) {
      diverged = true;
      break;
    }
    if (largest_change <= options.dual_tolerance) {
      converged = true;
      break;
    }
  }

  if (converged) {
    Vector refined_lambda;
    if (auto refined = refine_active_set(r, lambda, refined_lambda)) {
      solution.u = *refined;
      solution.status = QpStatus::kOptimal;
      set_multipliers(solution, refined_lambda);
      if (verify_kkt(problem, solution).within_tolerance()) return solution;
    }
  }

  // Hildreth alone did not certify an answer; the finite method decides.
  const auto exact = dual_active_set(r);
  solution.used_active_set_fallback = true;
  solution.u = exact.u;
  solution.status = exact.status;
  set_multipliers(solution, exact.lambda);
  if (exact.status == QpStatus::kInfeasible) {
    for (auto i : exact.culprits) solution.culprits.push_back(rows[static_cast<std::size_t>(i)].tag);
    solution.diagnostic = fmt::format(
        "dual unbounded{}: a violated row is opposed by a nonnegative combination of active rows",
        diverged ? " (multipliers exceeded the divergence limit)" : "");
    solution.multipliers.assign(rows.size(), 0.0);
    return solution;
  }
  if (exact.status == QpStatus::kMaxIterations) {
    solution.diagnostic = "active-set iteration cap reached";
    return solution;
  }
  const auto kkt = verify_kkt(problem, solution);
  if (!kkt.within_tolerance()) {
    solution.status = QpStatus::kMaxIterations;
    solution.diagnostic = fmt::format(
        "tolerances not met (feasibility {:.3g}, stationarity {:.3g}, complementarity {:.3g})",
        kkt.feasibility, kkt.stationarity, kkt.complementarity);
  }
  return solution;
}

bool KktReport::within_tolerance(double feasibility_tol, double stationarity_tol,
                                 double complementarity_tol) const {
  return feasibility <= feasibility_tol && stationarity <= stationarity_tol &&
         complementarity <= complementarity_tol && dual_sign == 0.0;
}

KktReport verify_kkt(const QpProblem& problem, const QpSolution& solution) {
  const auto rows = expanded_rows(problem);
  if (static_cast<std::size_t>(solution.u.size()) != problem.dim) {
    throw DimensionError("solution length does not match the problem dimension");
  }
  KktReport report;
  Vector combination = Vector::Zero(static_cast<Eigen::Index>(problem.dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double lambda = i < solution.multipliers.size() ? solution.multipliers[i] : 0.0;
    const double slack = rows[i].slack(solution.u);
    report.feasibility = std::max(report.feasibility, -slack);
    report.complementarity = std::max(report.complementarity, std::abs(lambda * slack));
    report.dual_sign = std::max(report.dual_sign, -lambda);
    combination += lambda * rows[i].normal;
  }
  report.stationarity = (solution.u - combination).norm();
  return report;
}

}  // namespace ftcbf
