#include "doctest.h"

#include <algorithm>
#include <limits>
#include <random>

#include "ftcbf/oracle.hpp"
#include "ftcbf/qp.hpp"
#include "support.hpp"

using namespace ftcbf;
using test::vec;

namespace {

ConstraintRow row(Vector a, double b, std::string id = "r") {
  return {std::move(a), b, {RowKind::kInvariance, std::move(id)}};
}

QpProblem problem(std::vector<ConstraintRow> rows, std::size_t dim) {
  return {std::move(rows), dim, std::nullopt};
}

}  // namespace

TEST_CASE("no rows gives zero") {
  const auto s = solve(problem({}, 3));
  CHECK(s.status == QpStatus::kOptimal);
  CHECK(s.u == Vector::Zero(3));
  CHECK(s.multipliers.empty());
}

TEST_CASE("single halfspace") {
  const auto p = problem({row(vec({1, 0}), 3)}, 2);
  const auto s = solve(p);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - vec({3, 0})).norm() < 1e-12);
  const auto kkt = verify_kkt(p, s);
  CHECK(kkt.feasibility <= 1e-10);
  CHECK(kkt.stationarity <= 1e-10);
  CHECK(kkt.complementarity <= 1e-10);
  CHECK(kkt.dual_sign <= 1e-10);
  CHECK(kkt.within_tolerance());
}

TEST_CASE("oblique halfspace is a scaled normal") {
  const Vector a = vec({1, 2, -2});
  const auto s = solve(problem({row(a, 4.5)}, 3));
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - a * (4.5 / a.squaredNorm())).norm() < 1e-12);
}

TEST_CASE("slack rows leave u at zero") {
  const auto s = solve(problem({row(vec({1, 0}), -1), row(vec({0, 1}), -2)}, 2));
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK(s.u.norm() == 0.0);
}

TEST_CASE("two active rows meet at a corner") {
  const auto p = problem({row(vec({1, 0}), 1), row(vec({0, 1}), 1)}, 2);
  const auto s = solve(p);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - vec({1, 1})).norm() < 1e-10);
  CHECK(verify_kkt(p, s).within_tolerance());

  // Grid search on [-2, 2]^2, refined around the best point.
  Vector arg = vec({0, 0});
  double lo_x = -2.0, lo_y = -2.0;
  for (double h = 0.25; h > 1e-8; h /= 4.0) {
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 16; ++i) {
      for (int j = 0; j <= 16; ++j) {
        const double x = lo_x + i * h;
        const double y = lo_y + j * h;
        if (x >= 1 && y >= 1 && x * x + y * y < best) {
          best = x * x + y * y;
          arg = vec({x, y});
        }
      }
    }
    lo_x = arg(0) - 2 * h;
    lo_y = arg(1) - 2 * h;
  }
  CHECK((s.u - arg).norm() < 1e-5);
  const auto exact = oracle::min_norm_by_enumeration(p.rows, 2);
  REQUIRE(exact);
  CHECK((s.u - *exact).norm() < 1e-10);
}

TEST_CASE("contradictory halfspaces are infeasible") {
  const auto s = solve(problem({row(vec({1, 0}), 1, "up"), row(vec({-1, 0}), 1, "down")}, 2));
  CHECK(s.status == QpStatus::kInfeasible);
  CHECK_FALSE(s.diagnostic.empty());
  std::vector<std::string> ids;
  for (const auto& tag : s.culprits) ids.push_back(tag.barrier_id);
  CHECK(std::find(ids.begin(), ids.end(), "up") != ids.end());
  CHECK(std::find(ids.begin(), ids.end(), "down") != ids.end());
}

TEST_CASE("zero normal with positive offset is infeasible immediately") {
  const auto s = solve(problem({row(vec({1, 1}), 1, "fine"), row(vec({0, 0}), 0.5, "dead")}, 2));
  CHECK(s.status == QpStatus::kInfeasible);
  REQUIRE(s.culprits.size() == 1);
  CHECK(s.culprits[0].barrier_id == "dead");
}

TEST_CASE("zero normal with non-positive offset is harmless") {
  const auto s = solve(problem({row(vec({0, 0}), 0.0), row(vec({0, 0}), -1.0), row(vec({0, 2}), 2)}, 2));
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - vec({0, 1})).norm() < 1e-12);
}

TEST_CASE("box bounds become rows") {
  QpProblem p = problem({row(vec({1, 1}), 4)}, 2);
  p.bounds = BoxBounds{vec({-1, -1}), vec({1.5, 10})};
  const auto rows = expanded_rows(p);
  CHECK(rows.size() == 5);
  CHECK(rows.back().tag.kind == RowKind::kBox);
  const auto s = solve(p);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - vec({1.5, 2.5})).norm() < 1e-9);
  CHECK(s.multipliers.size() == 5);
  CHECK(verify_kkt(p, s).within_tolerance());

  p.bounds = BoxBounds{vec({-1, -1}), vec({1, 1})};
  CHECK(solve(p).status == QpStatus::kInfeasible);
}

TEST_CASE("verify_kkt reports constructed violations") {
  const auto p = problem({row(vec({1, 0}), 3)}, 2);
  auto s = solve(p);
  s.u = vec({3.1, 0});
  const auto perturbed = verify_kkt(p, s);
  CHECK(perturbed.stationarity == doctest::Approx(0.1));
  CHECK_FALSE(perturbed.within_tolerance());

  QpSolution zero;
  zero.u = vec({0, 0});
  zero.status = QpStatus::kOptimal;
  zero.multipliers = {0.0};
  CHECK(verify_kkt(p, zero).feasibility == 3.0);

  QpSolution negative = solve(p);
  negative.multipliers = {-0.5};
  CHECK(verify_kkt(p, negative).dual_sign == 0.5);
}

TEST_CASE("parallel and duplicate rows") {
  const auto p = problem({row(vec({1, 1}), 2), row(vec({2, 2}), 4), row(vec({1, 1}), 1)}, 2);
  const auto s = solve(p);
  REQUIRE(s.status == QpStatus::kOptimal);
  CHECK((s.u - vec({1, 1})).norm() < 1e-10);
  CHECK(verify_kkt(p, s).within_tolerance());
}

TEST_CASE("random problems match enumeration") {
  std::mt19937_64 rng(123);
  std::uniform_int_distribution<int> dims(1, 4), counts(1, 6);
  std::uniform_real_distribution<double> slack(0.0, 1.5);
  for (int c = 0; c < 300; ++c) {
    const auto m = static_cast<std::size_t>(dims(rng));
    const Vector anchor = test::random_vector(rng, static_cast<Eigen::Index>(m), -2, 2);
    std::vector<ConstraintRow> rows;
    const int n = counts(rng);
    for (int i = 0; i < n; ++i) {
      const Vector a = test::random_vector(rng, static_cast<Eigen::Index>(m), -1, 1);
      rows.push_back(row(a, a.dot(anchor) - (i % 2 ? slack(rng) : 0.0)));
    }
    const auto p = problem(rows, m);
    const auto s = solve(p);
    const auto expected = oracle::min_norm_by_enumeration(rows, m);
    REQUIRE(expected);
    REQUIRE(s.status == QpStatus::kOptimal);
    CHECK((s.u - *expected).norm() <= 1e-7);
    CHECK(verify_kkt(p, s).within_tolerance());
    // Exactly reproducible.
    const auto again = solve(p);
    CHECK(again.u == s.u);
    CHECK(again.multipliers == s.multipliers);
  }
}

TEST_CASE("dual ascent is monotone under the debug check") {
  std::mt19937_64 rng(77);
  QpOptions options;
  options.check_dual_monotone = true;
  for (int c = 0; c < 200; ++c) {
    std::vector<ConstraintRow> rows;
    for (int i = 0; i < 5; ++i) rows.push_back(row(test::random_vector(rng, 3, -1, 1), 0.5));
    CHECK_NOTHROW(solve(problem(rows, 3), options));
  }
}

TEST_CASE("iteration cap without the exact pass") {
  // Two nearly parallel active rows converge slowly under coordinate ascent.
  QpOptions options;
  options.max_sweeps = 2;
  const auto p = problem({row(vec({1, 0}), 1), row(vec({1, 1e-3}), 1.001)}, 2);
  const auto s = solve(p, options);
  // Either the exact refinement recovers the answer or the cap is reported.
  if (s.status == QpStatus::kOptimal) {
    CHECK(verify_kkt(p, s).within_tolerance());
  } else {
    CHECK(s.status == QpStatus::kMaxIterations);
  }
  CHECK(to_string(QpStatus::kOptimal) == "optimal");
  CHECK(to_string(QpStatus::kInfeasible) == "infeasible");
}

TEST_CASE("dimension mismatch is rejected") {
  CHECK_THROWS(solve(problem({row(vec({1, 0, 0}), 1)}, 2)));
}
