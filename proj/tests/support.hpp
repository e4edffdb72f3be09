#pragma once

#include <initializer_list>
#include <random>

#include "ftcbf/barrier.hpp"

namespace test {

inline ftcbf::Vector vec(std::initializer_list<double> values) {
  ftcbf::Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline ftcbf::StackedState state(std::size_t agents, std::size_t dim, std::initializer_list<double> values) {
  return ftcbf::StackedState(agents, dim, vec(values));
}

inline ftcbf::QuadraticRegion ball(std::initializer_list<double> center, double p = 1.0) {
  const auto c = vec(center);
  return ftcbf::QuadraticRegion(c, p * ftcbf::Matrix::Identity(c.size(), c.size()));
}

inline ftcbf::Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  ftcbf::Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

}  // namespace test
