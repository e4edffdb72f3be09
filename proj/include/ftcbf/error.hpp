#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ftcbf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes disagree (state vs. region, agent index out of range, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A parameter lies outside its admissible domain (gamma <= 0, epsilon <= 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A required condition on the inputs of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The control QP has no solution at the current state. `culprits` lists the
/// barrier ids of the rows that make it so.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::vector<std::string> culprits)
      : Error(what), culprits_(std::move(culprits)) {}

  const std::vector<std::string>& culprits() const { return culprits_; }

 private:
  std::vector<std::string> culprits_;
};

}  // namespace ftcbf
