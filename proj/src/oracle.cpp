#include "ftcbf/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftcbf::oracle {

Vector central_difference_gradient(const std::function<double(const Vector&)>& f,
                                   const Vector& x, double step) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector hi = x;
    Vector lo = x;
    hi(i) += step;
    lo(i) -= step;
    g(i) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

Vector central_difference_gradient(const BarrierFunction& h, const StackedState& x,
                                   double step) {
  return central_difference_gradient([&](const Vector& v) { return h.eval(x.with_flat(v)); },
                                     x.flat(), step);
}

std::optional<Vector> min_norm_by_enumeration(const std::vector<ConstraintRow>& rows,
                                              std::size_t dim, double feasibility_tol) {
  const auto m = static_cast<Eigen::Index>(dim);
  const std::size_t count = rows.size();
  std::optional<Vector> best;
  double best_norm = std::numeric_limits<double>::infinity();
  for (std::size_t mask = 0; mask < (std::size_t{1} << count); ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < count; ++i) {
      if (mask & (std::size_t{1} << i)) subset.push_back(i);
    }
    Vector u = Vector::Zero(m);
    if (!subset.empty()) {
      Matrix a(static_cast<Eigen::Index>(subset.size()), m);
      Vector b(static_cast<Eigen::Index>(subset.size()));
      for (std::size_t j = 0; j < subset.size(); ++j) {
        a.row(static_cast<Eigen::Index>(j)) = rows[subset[j]].normal.transpose();
        b(static_cast<Eigen::Index>(j)) = rows[subset[j]].offset;
      }
      Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
      u = svd.solve(b);
      if ((a * u - b).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
        continue;  // equalities inconsistent
      }
    }
    bool feasible = true;
    for (const auto& row : rows) {
      if (row.normal.dot(u) - row.offset < -feasibility_tol) {
        feasible = false;
        break;
      }
    }
    if (feasible && u.norm() < best_norm) {
      best_norm = u.norm();
      best = u;
    }
  }
  return best;
}

double cbf_condition(const BarrierFunction& h, const ControlAffineDynamics& dyn,
                     const FtcbfParams& params, const StackedState& x, const Vector& u) {
  const double value = h.eval(x);
  const Vector velocity = dyn.drift(x) + dyn.actuation(x) * u;
  const double rate = h.gradient(x).dot(velocity);
  const double term =
      value == 0.0 ? 0.0 : params.gamma() * std::copysign(std::pow(std::abs(value), params.rho()), value);
  return rate + term;
}

std::vector<TraceEntry> compress_by_scan(const std::vector<TraceEntry>& samples) {
  std::vector<TraceEntry> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i == 0 || samples[i].set != samples[i - 1].set) out.push_back(samples[i]);
  }
  return out;
}

namespace {

std::size_t search(const std::vector<PropositionSet>& sets, const std::vector<Waypoint>& seq,
                   std::size_t matched, std::size_t from) {
  if (matched == seq.size()) return matched;
  std::size_t best = matched;
  for (std::size_t i = from; i < sets.size(); ++i) {
    if (seq[matched].matches(sets[i])) {
      best = std::max(best, search(sets, seq, matched + 1, i + 1));
      if (best == seq.size()) break;
    }
  }
  return best;
}

}  // namespace

std::size_t longest_embedding(const std::vector<PropositionSet>& sets,
                              const std::vector<Waypoint>& prefix,
                              const std::vector<Waypoint>& suffix, std::size_t cycles) {
  std::vector<Waypoint> seq = prefix;
  for (std::size_t c = 0; c < cycles; ++c) seq.insert(seq.end(), suffix.begin(), suffix.end());
  return search(sets, seq, 0, 0);
}

}  // namespace ftcbf::oracle
