#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>

namespace ftcbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Position of a single agent in the workspace.
using AgentState = Vector;

/// Positions of N agents, each of dimension n, stored contiguously as one
/// vector of length N*n (agent i occupies entries [i*n, (i+1)*n)).
class StackedState {
 public:
  StackedState(std::size_t agent_count, std::size_t agent_dim, Vector flat);

  static StackedState from_agents(std::span<const AgentState> agents);

  std::size_t agent_count() const { return agent_count_; }
  std::size_t agent_dim() const { return agent_dim_; }
  std::size_t dimension() const { return agent_count_ * agent_dim_; }

  /// View of agent `i`. Throws DimensionError when `i` is out of range.
  Eigen::VectorBlock<const Vector> agent(std::size_t i) const;

  const Vector& flat() const { return flat_; }

  /// Same layout, new values.
  StackedState with_flat(Vector flat) const;

  bool operator==(const StackedState& other) const;

 private:
  std::size_t agent_count_;
  std::size_t agent_dim_;
  Vector flat_;
};

/// Ellipsoidal region {x : (x - center)^T shape (x - center) <= 1}.
class QuadraticRegion {
 public:
  /// Throws DomainError unless `shape` is symmetric (1e-12) and positive definite.
  QuadraticRegion(Vector center, Matrix shape);

  const Vector& center() const { return center_; }
  const Matrix& shape() const { return shape_; }
  std::size_t dimension() const { return static_cast<std::size_t>(center_.size()); }

 private:
  Vector center_;
  Matrix shape_;
};

/// h_r(x) = 1 - (x - C)^T P (x - C). Never exceeds 1.
double eval_quadratic(const QuadraticRegion& region, const Eigen::Ref<const Vector>& x);

/// -2 P (x - C).
Vector grad_quadratic(const QuadraticRegion& region, const Eigen::Ref<const Vector>& x);

struct AgentPair {
  std::size_t first = 0;
  std::size_t second = 1;

  bool operator==(const AgentPair&) const = default;
};

struct ConnectivityParams {
  double delta1 = 0.0;
  double delta2 = 0.0;

  bool operator==(const ConnectivityParams&) const = default;
};

/// d^2 - ||x_j - x_i||^2 with d^2 = (x_{j,0} + delta1)^2 + delta2, where j is
/// `pair.second`. Positive iff the agents are within the connectivity radius.
double eval_connectivity(const StackedState& x, double delta1, double delta2, AgentPair pair);

/// -inner - epsilon. Throws DomainError if epsilon <= 0.
double eval_complement(double inner_value, double epsilon);

inline constexpr double kDefaultComplementEpsilon = 0.05;

/// Differentiable scalar field over the stacked state. The set {h >= 0} is the
/// region the barrier describes.
class BarrierFunction {
 public:
  using EvalFn = std::function<double(const StackedState&)>;
  using GradFn = std::function<Vector(const StackedState&)>;

  enum class Kind { kQuadraticRegion, kComplement, kConnectivity, kCustom };

  /// h_r evaluated on one agent. Declared bounded above by 1.
  static BarrierFunction quadratic(std::string id, std::size_t agent, QuadraticRegion region);

  /// -inner - epsilon; its zero super-level set lies strictly outside the
  /// inner region. Never declared bounded.
  static BarrierFunction complement(std::string id, BarrierFunction inner,
                                    double epsilon = kDefaultComplementEpsilon);

  static BarrierFunction connectivity(std::string id, AgentPair pair, ConnectivityParams params);

  /// User-supplied field. The caller vouches for the gradient and for
  /// `bounded_above`.
  static BarrierFunction custom(std::string id, EvalFn eval, GradFn gradient,
                                std::optional<double> bounded_above = std::nullopt);

  /// Copy with different boundedness metadata. A present bound must be > 0.
  BarrierFunction with_bound(std::optional<double> bounded_above) const;

  double eval(const StackedState& x) const;

  /// Gradient with respect to the stacked state (length N*n).
  Vector gradient(const StackedState& x) const;

  const std::string& id() const { return id_; }
  Kind kind() const;
  std::optional<double> bounded_above() const { return bounded_above_; }

  /// Inner barrier of a complement, nullptr otherwise.
  const BarrierFunction* inner() const;

 private:
  struct Quadratic {
    std::size_t agent;
    QuadraticRegion region;
  };
  struct Complement {
    std::shared_ptr<const BarrierFunction> inner;
    double epsilon;
  };
  struct Connectivity {
    AgentPair pair;
    ConnectivityParams params;
  };
  struct Custom {
    EvalFn eval;
    GradFn gradient;
  };
  using Impl = std::variant<Quadratic, Complement, Connectivity, Custom>;

  BarrierFunction(std::string id, Impl impl, std::optional<double> bounded_above);

  std::string id_;
  Impl impl_;
  std::optional<double> bounded_above_;
};

struct AtomicProposition {
  std::string id;
  BarrierFunction barrier;
};

/// True iff the proposition's barrier is >= 0 at x (no tolerance).
bool holds(const AtomicProposition& prop, const StackedState& x);

}  // namespace ftcbf
