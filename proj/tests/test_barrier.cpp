#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "ftcbf/barrier.hpp"
#include "ftcbf/error.hpp"
#include "ftcbf/oracle.hpp"
#include "support.hpp"

using namespace ftcbf;
using test::ball;
using test::state;
using test::vec;

TEST_CASE("stacked state layout") {
  const std::vector<AgentState> agents = {vec({1, 2}), vec({3, 4}), vec({5, 6})};
  const auto x = StackedState::from_agents(agents);
  CHECK(x.agent_count() == 3);
  CHECK(x.agent_dim() == 2);
  CHECK(x.dimension() == 6);
  CHECK(x.agent(1)(0) == 3.0);
  CHECK(x.agent(2)(1) == 6.0);
  CHECK(x.flat()(4) == 5.0);
  CHECK_THROWS_AS(x.agent(3), DimensionError);
  CHECK(x.with_flat(x.flat()) == x);
  CHECK_FALSE(x.with_flat(vec({0, 0, 0, 0, 0, 0})) == x);
  CHECK_THROWS_AS(x.with_flat(vec({1, 2})), DimensionError);
}

TEST_CASE("stacked state rejects bad input") {
  CHECK_THROWS_AS(StackedState(2, 2, vec({1, 2, 3})), DimensionError);
  CHECK_THROWS_AS(StackedState(0, 2, Vector()), DimensionError);
  CHECK_THROWS_AS(StackedState(1, 0, Vector()), DimensionError);
  CHECK_THROWS(StackedState(1, 2, vec({1, std::numeric_limits<double>::quiet_NaN()})));
  const std::vector<AgentState> mixed = {vec({1, 2}), vec({3})};
  CHECK_THROWS_AS(StackedState::from_agents(mixed), DimensionError);
}

TEST_CASE("quadratic region validation") {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0, 1;
  CHECK_THROWS_AS(QuadraticRegion(vec({0, 0}), asym), DomainError);
  Matrix indefinite(2, 2);
  indefinite << 1, 0, 0, -1;
  CHECK_THROWS_AS(QuadraticRegion(vec({0, 0}), indefinite), DomainError);
  CHECK_THROWS_AS(QuadraticRegion(vec({0, 0}), Matrix::Zero(2, 2)), DomainError);
  CHECK_THROWS_AS(QuadraticRegion(vec({0, 0, 0}), Matrix::Identity(2, 2)), DimensionError);
  Matrix tiny_asym(2, 2);
  tiny_asym << 2, 1e-14, 0, 2;
  CHECK_NOTHROW(QuadraticRegion(vec({0, 0}), tiny_asym));
}

TEST_CASE("eval_quadratic") {
  const auto r = ball({0, 0});
  CHECK(eval_quadratic(r, vec({0, 0})) == 1.0);
  CHECK(eval_quadratic(r, vec({1, 0})) == 0.0);
  CHECK(eval_quadratic(r, vec({2, 0})) == -3.0);
  CHECK_THROWS_AS(eval_quadratic(r, vec({1, 0, 0})), DimensionError);
}

TEST_CASE("grad_quadratic") {
  const auto r = ball({0, 0});
  CHECK(grad_quadratic(r, vec({0, 0})) == vec({0, 0}));
  CHECK(grad_quadratic(r, vec({2, 0})) == vec({-4, 0}));
  CHECK_THROWS_AS(grad_quadratic(r, vec({1})), DimensionError);

  Matrix p(2, 2);
  p << 1, 0, 0, 4;
  const QuadraticRegion skewed(vec({1, 1}), p);
  const Vector g = grad_quadratic(skewed, vec({2, 2}));
  CHECK(g == vec({-2, -8}));
  const Vector fd = oracle::central_difference_gradient(
      [&](const Vector& v) { return eval_quadratic(skewed, v); }, vec({2, 2}));
  CHECK((g - fd).norm() < 1e-6);
}

TEST_CASE("eval_connectivity") {
  CHECK(eval_connectivity(state(2, 2, {0, 0, 0, 0}), 0.0, 1.0, {0, 1}) == 1.0);
  CHECK(eval_connectivity(state(2, 2, {0, 0, 0, 1}), 0.0, 1.0, {0, 1}) == 0.0);
  CHECK(eval_connectivity(state(2, 2, {0, 0, 2, 0}), 1.0, 0.0, {0, 1}) == 5.0);
  // The radius follows the second agent of the pair.
  CHECK(eval_connectivity(state(2, 2, {0, 0, 2, 0}), 1.0, 0.0, {1, 0}) == doctest::Approx(1.0 - 4.0));
  CHECK_THROWS_AS(eval_connectivity(state(2, 2, {0, 0, 0, 0}), 0.0, 1.0, {0, 2}), DimensionError);
  CHECK_THROWS(eval_connectivity(state(2, 2, {0, 0, 0, 0}), 0.0, 1.0, {1, 1}));
}

TEST_CASE("eval_complement") {
  CHECK(eval_complement(-1.0, 0.05) == doctest::Approx(0.95));
  CHECK(eval_complement(0.0, 0.05) == -0.05);
  CHECK(eval_complement(-0.05, 0.05) == 0.0);
  CHECK_THROWS_AS(eval_complement(0.0, 0.0), DomainError);
  CHECK_THROWS_AS(eval_complement(0.0, -0.1), DomainError);
}

TEST_CASE("holds is eval >= 0 with no tolerance") {
  const AtomicProposition at_origin{"p", BarrierFunction::quadratic("p", 0, ball({0, 0}))};
  CHECK(holds(at_origin, state(1, 2, {0, 0})));
  CHECK_FALSE(holds(at_origin, state(1, 2, {2, 0})));
  CHECK(holds(at_origin, state(1, 2, {1, 0})));
  CHECK_FALSE(holds(at_origin, state(1, 2, {std::nextafter(1.0, 2.0), 0})));
}

TEST_CASE("barrier metadata") {
  const auto q = BarrierFunction::quadratic("q", 0, ball({0, 0}));
  CHECK(q.kind() == BarrierFunction::Kind::kQuadraticRegion);
  CHECK(q.bounded_above() == 1.0);
  CHECK(q.inner() == nullptr);

  const auto c = BarrierFunction::complement("!q", q, 0.1);
  CHECK(c.kind() == BarrierFunction::Kind::kComplement);
  CHECK_FALSE(c.bounded_above().has_value());
  REQUIRE(c.inner() != nullptr);
  CHECK(c.inner()->id() == "q");
  CHECK(c.eval(state(1, 2, {2, 0})) == doctest::Approx(3.0 - 0.1));
  CHECK_THROWS_AS(BarrierFunction::complement("!q", q, 0.0), DomainError);

  const auto link = BarrierFunction::connectivity("link", {0, 1}, {1.5, 0.25});
  CHECK(link.kind() == BarrierFunction::Kind::kConnectivity);
  CHECK_FALSE(link.bounded_above().has_value());

  const auto custom = BarrierFunction::custom(
      "s", [](const StackedState& x) { return -x.flat()(0); },
      [](const StackedState& x) { Vector g = Vector::Zero(x.dimension()); g(0) = -1; return g; }, 2.0);
  CHECK(custom.kind() == BarrierFunction::Kind::kCustom);
  CHECK(custom.bounded_above() == 2.0);

  CHECK_FALSE(q.with_bound(std::nullopt).bounded_above().has_value());
  CHECK(link.with_bound(3.0).bounded_above() == 3.0);
  CHECK_THROWS_AS(q.with_bound(0.0), DomainError);
  CHECK_THROWS_AS(q.with_bound(-1.0), DomainError);
}

TEST_CASE("quadratic barrier rejects an agent outside the state") {
  const auto q = BarrierFunction::quadratic("q", 2, ball({0, 0}));
  CHECK_THROWS_AS(q.eval(state(2, 2, {0, 0, 0, 0})), DimensionError);
  const auto wide = BarrierFunction::quadratic("w", 0, ball({0, 0, 0}));
  CHECK_THROWS_AS(wide.eval(state(2, 2, {0, 0, 0, 0})), DimensionError);
}

TEST_CASE("full-length gradients") {
  const auto q = BarrierFunction::quadratic("q", 1, ball({1, 0}));
  const auto x = state(3, 2, {5, 5, 2, 0, 7, 7});
  CHECK(q.gradient(x) == vec({0, 0, -2, 0, 0, 0}));

  const auto link = BarrierFunction::connectivity("link", {0, 1}, {1.0, 0.0});
  const auto y = state(2, 2, {0, 0, 2, 0});
  // d/dx_i = 2 (x_j - x_i); d/dx_j = -2 (x_j - x_i) + 2 (x_j0 + d1) e0
  CHECK(link.gradient(y) == vec({4, 0, -4 + 6, 0}));
}

TEST_CASE("gradient consistency per kind") {
  std::mt19937_64 rng(7);
  const auto check_kind = [&](const BarrierFunction& h, std::size_t agents) {
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      const StackedState x(agents, 2, test::random_vector(rng, static_cast<Eigen::Index>(agents * 2), -3, 3));
      const Vector fd = oracle::central_difference_gradient(h, x);
      worst = std::max(worst, (h.gradient(x) - fd).norm() / std::max(1.0, fd.norm()));
    }
    return worst;
  };
  Matrix p(2, 2);
  p << 3, 1, 1, 2;
  const auto q = BarrierFunction::quadratic("q", 1, QuadraticRegion(vec({0.5, -0.5}), p));
  CHECK(check_kind(q, 2) < 1e-5);
  CHECK(check_kind(BarrierFunction::complement("!q", q, 0.05), 2) < 1e-5);
  CHECK(check_kind(BarrierFunction::connectivity("c", {2, 0}, {0.7, 0.3}), 3) < 1e-5);
  const auto custom = BarrierFunction::custom(
      "s", [](const StackedState& x) { return std::cos(x.flat()(0)) + x.flat()(1) * x.flat()(2); },
      [](const StackedState& x) {
        Vector g = Vector::Zero(x.dimension());
        g(0) = -std::sin(x.flat()(0));
        g(1) = x.flat()(2);
        g(2) = x.flat()(1);
        return g;
      });
  CHECK(check_kind(custom, 2) < 1e-5);
}

TEST_CASE("quadratic barrier never exceeds one and complements are sound") {
  std::mt19937_64 rng(11);
  Matrix p(2, 2);
  p << 16, 2, 2, 9;
  const QuadraticRegion r(vec({0.3, -0.2}), p);
  for (int s = 0; s < 1000; ++s) {
    const Vector x = test::random_vector(rng, 2, -2, 2);
    const double h = eval_quadratic(r, x);
    CHECK(h <= 1.0);
    if (eval_complement(h, 0.05) >= 0.0) CHECK(h < 0.0);
  }
}
