#include "ftcbf/barrier.hpp"

#include <fmt/format.h>

#include "ftcbf/error.hpp"

namespace ftcbf {

StackedState::StackedState(std::size_t agent_count, std::size_t agent_dim, Vector flat)
    : agent_count_(agent_count), agent_dim_(agent_dim), flat_(std::move(flat)) {
  if (agent_count_ == 0 || agent_dim_ == 0) {
    throw DimensionError("stacked state needs at least one agent of dimension >= 1");
  }
  if (static_cast<std::size_t>(flat_.size()) != agent_count_ * agent_dim_) {
    throw DimensionError(fmt::format("stacked state of {}x{} agents given {} entries",
                                     agent_count_, agent_dim_, flat_.size()));
  }
  if (!flat_.allFinite()) {
    throw DomainError("stacked state has non-finite entries");
  }
}

StackedState StackedState::from_agents(std::span<const AgentState> agents) {
  if (agents.empty()) {
    throw DimensionError("stacked state needs at least one agent");
  }
  const auto n = static_cast<std::size_t>(agents.front().size());
  Vector flat(static_cast<Eigen::Index>(agents.size() * n));
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (static_cast<std::size_t>(agents[i].size()) != n) {
      throw DimensionError(fmt::format("agent {} has dimension {}, expected {}", i,
                                       agents[i].size(), n));
    }
    flat.segment(static_cast<Eigen::Index>(i * n), static_cast<Eigen::Index>(n)) = agents[i];
  }
  return StackedState(agents.size(), n, std::move(flat));
}

Eigen::VectorBlock<const Vector> StackedState::agent(std::size_t i) const {
  if (i >= agent_count_) {
    throw DimensionError(fmt::format("agent index {} out of range (N = {})", i, agent_count_));
  }
  return flat_.segment(static_cast<Eigen::Index>(i * agent_dim_),
                       static_cast<Eigen::Index>(agent_dim_));
}

StackedState StackedState::with_flat(Vector flat) const {
  return StackedState(agent_count_, agent_dim_, std::move(flat));
}

bool StackedState::operator==(const StackedState& other) const {
  return agent_count_ == other.agent_count_ && agent_dim_ == other.agent_dim_ &&
         flat_ == other.flat_;
}

QuadraticRegion::QuadraticRegion(Vector center, Matrix shape)
    : center_(std::move(center)), shape_(std::move(shape)) {
  const auto n = center_.size();
  if (n == 0) {
    throw DimensionError("region center must be non-empty");
  }
  if (shape_.rows() != n || shape_.cols() != n) {
    throw DimensionError(fmt::format("region shape is {}x{}, center has length {}",
                                     shape_.rows(), shape_.cols(), n));
  }
  if (!center_.allFinite() || !shape_.allFinite()) {
    throw DomainError("region has non-finite entries");
  }
  if ((shape_ - shape_.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw DomainError("region shape matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(shape_, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() <= 0.0) {
    throw DomainError("region shape matrix is not positive definite");
  }
}

namespace {

void check_region_dim(const QuadraticRegion& region, Eigen::Index size) {
  if (static_cast<std::size_t>(size) != region.dimension()) {
    throw DimensionError(
        fmt::format("state has dimension {}, region has {}", size, region.dimension()));
  }
}

}  // namespace

double eval_quadratic(const QuadraticRegion& region, const Eigen::Ref<const Vector>& x) {
  check_region_dim(region, x.size());
  const Vector d = x - region.center();
  return 1.0 - d.dot(region.shape() * d);
}

Vector grad_quadratic(const QuadraticRegion& region, const Eigen::Ref<const Vector>& x) {
  check_region_dim(region, x.size());
  return -2.0 * (region.shape() * (x - region.center()));
}

namespace {

void check_pair(const StackedState& x, AgentPair pair) {
  if (pair.first >= x.agent_count() || pair.second >= x.agent_count() ||
      pair.first == pair.second) {
    throw DimensionError(fmt::format("invalid connectivity pair ({}, {}) for {} agents",
                                     pair.first, pair.second, x.agent_count()));
  }
}

}  // namespace

double eval_connectivity(const StackedState& x, double delta1, double delta2, AgentPair pair) {
  check_pair(x, pair);
  const auto xi = x.agent(pair.first);
  const auto xj = x.agent(pair.second);
  const double reach = xj(0) + delta1;
  return reach * reach + delta2 - (xj - xi).squaredNorm();
}

double eval_complement(double inner_value, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw DomainError(fmt::format("complement epsilon must be > 0, got {}", epsilon));
  }
  return -inner_value - epsilon;
}

BarrierFunction::BarrierFunction(std::string id, Impl impl, std::optional<double> bounded_above)
    : id_(std::move(id)), impl_(std::move(impl)), bounded_above_(bounded_above) {
  if (bounded_above_ && !(*bounded_above_ > 0.0)) {
    throw DomainError(fmt::format("barrier '{}': upper bound must be > 0", id_));
  }
}

BarrierFunction BarrierFunction::quadratic(std::string id, std::size_t agent,
                                           QuadraticRegion region) {
  return BarrierFunction(std::move(id), Quadratic{agent, std::move(region)}, 1.0);
}

BarrierFunction BarrierFunction::complement(std::string id, BarrierFunction inner,
                                            double epsilon) {
  if (!(epsilon > 0.0)) {
    throw DomainError(fmt::format("barrier '{}': complement epsilon must be > 0", id));
  }
  return BarrierFunction(
      std::move(id),
      Complement{std::make_shared<const BarrierFunction>(std::move(inner)), epsilon},
      std::nullopt);
}

BarrierFunction BarrierFunction::connectivity(std::string id, AgentPair pair,
                                              ConnectivityParams params) {
  if (pair.first == pair.second) {
    throw DimensionError(fmt::format("barrier '{}': connectivity pair must be distinct", id));
  }
  return BarrierFunction(std::move(id), Connectivity{pair, params}, std::nullopt);
}

BarrierFunction BarrierFunction::custom(std::string id, EvalFn eval, GradFn gradient,
                                        std::optional<double> bounded_above) {
  if (!eval || !gradient) {
    throw PreconditionError(fmt::format("barrier '{}': custom callbacks must be set", id));
  }
  return BarrierFunction(std::move(id), Custom{std::move(eval), std::move(gradient)},
                         bounded_above);
}

BarrierFunction BarrierFunction::with_bound(std::optional<double> bounded_above) const {
  return BarrierFunction(id_, impl_, bounded_above);
}

BarrierFunction::Kind BarrierFunction::kind() const {
  switch (impl_.index()) {
    case 0: return Kind::kQuadraticRegion;
    case 1: return Kind::kComplement;
    case 2: return Kind::kConnectivity;
    default: return Kind::kCustom;
  }
}

const BarrierFunction* BarrierFunction::inner() const {
  if (const auto* c = std::get_if<Complement>(&impl_)) {
    return c->inner.get();
  }
  return nullptr;
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

double BarrierFunction::eval(const StackedState& x) const {
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) { return eval_quadratic(q.region, x.agent(q.agent)); },
          [&](const Complement& c) { return eval_complement(c.inner->eval(x), c.epsilon); },
          [&](const Connectivity& c) {
            return eval_connectivity(x, c.params.delta1, c.params.delta2, c.pair);
          },
          [&](const Custom& c) { return c.eval(x); },
      },
      impl_);
}

Vector BarrierFunction::gradient(const StackedState& x) const {
  return std::visit(
      Overloaded{
          [&](const Quadratic& q) -> Vector {
            Vector g = Vector::Zero(static_cast<Eigen::Index>(x.dimension()));
            g.segment(static_cast<Eigen::Index>(q.agent * x.agent_dim()),
                      static_cast<Eigen::Index>(x.agent_dim())) =
                grad_quadratic(q.region, x.agent(q.agent));
            return g;
          },
          [&](const Complement& c) -> Vector { return -c.inner->gradient(x); },
          [&](const Connectivity& c) -> Vector {
            check_pair(x, c.pair);
            const auto n = static_cast<Eigen::Index>(x.agent_dim());
            const auto i = static_cast<Eigen::Index>(c.pair.first) * n;
            const auto j = static_cast<Eigen::Index>(c.pair.second) * n;
            const Vector sep = x.agent(c.pair.second) - x.agent(c.pair.first);
            Vector g = Vector::Zero(static_cast<Eigen::Index>(x.dimension()));
            g.segment(i, n) = 2.0 * sep;
            g.segment(j, n) = -2.0 * sep;
            g(j) += 2.0 * (x.agent(c.pair.second)(0) + c.params.delta1);
            return g;
          },
          [&](const Custom& c) -> Vector {
            Vector g = c.gradient(x);
            if (static_cast<std::size_t>(g.size()) != x.dimension()) {
              throw DimensionError(fmt::format("barrier '{}': gradient has length {}, state {}",
                                               id_, g.size(), x.dimension()));
            }
            return g;
          },
      },
      impl_);
}

bool holds(const AtomicProposition& prop, const StackedState& x) {
  return prop.barrier.eval(x) >= 0.0;
}

}  // namespace ftcbf
