#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ftcbf/error.hpp"
#include "ftcbf/sim.hpp"

namespace ftcbf {

/// One schema problem, located by JSON pointer.
struct SchemaIssue {
  std::string pointer;
  std::string message;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(std::vector<SchemaIssue> issues);
  const std::vector<SchemaIssue>& issues() const { return issues_; }

 private:
  std::vector<SchemaIssue> issues_;
};

struct AgentsSpec {
  std::size_t count = 0;
  std::size_t dimension = 0;
  std::vector<std::vector<double>> initial_positions;

  bool operator==(const AgentsSpec&) const = default;
};

struct WorkspaceBounds {
  std::vector<double> lower;
  std::vector<double> upper;

  bool operator==(const WorkspaceBounds&) const = default;
};

struct RegionSpec {
  std::string id;
  std::vector<double> center;
  /// Row-major n x n.
  std::vector<double> shape;
  /// Complement margin for propositions over this region.
  std::optional<double> epsilon;

  bool operator==(const RegionSpec&) const = default;
};

struct ConnectivitySpec {
  std::string id;
  double delta1 = 0.0;
  double delta2 = 0.0;
  /// 0-based agent indices; the second agent supplies the x coordinate.
  std::size_t first = 0;
  std::size_t second = 1;

  bool operator==(const ConnectivitySpec&) const = default;
};

/// Unset: the barrier's default; null: force individual treatment; number: bound M.
using BoundOverride = std::variant<std::monostate, std::nullptr_t, double>;

struct PropositionSpec {
  std::string id;
  /// Exactly one of (region, agent) or global is set.
  std::optional<std::string> region;
  std::optional<std::size_t> agent;
  std::optional<std::string> global;
  BoundOverride bounded_above;

  bool operator==(const PropositionSpec&) const = default;
};

struct LassoSpec {
  std::vector<std::string> prefix;
  std::vector<std::string> suffix;

  bool operator==(const LassoSpec&) const = default;
};

struct ParamsSpec {
  double gamma = 1.0;
  double rho = 0.5;
  double epsilon = kDefaultComplementEpsilon;
  /// Composite weight per proposition id; 1 when absent.
  std::map<std::string, double> alpha;

  bool operator==(const ParamsSpec&) const = default;
};

struct SimSpec {
  double dt = 0.01;
  double max_time = 100.0;
  std::size_t suffix_cycles_target = 2;
  double goal_switch_margin = 0.0;

  bool operator==(const SimSpec&) const = default;
};

struct ScenarioFile {
  std::string name;
  /// Free-text LTL formula; documentation only.
  std::string ltl_comment;
  AgentsSpec agents;
  std::optional<WorkspaceBounds> workspace;
  std::vector<RegionSpec> regions;
  std::vector<ConnectivitySpec> global_constraints;
  std::vector<PropositionSpec> propositions;
  std::vector<InducedProblemSpec> problems;
  LassoSpec lasso;
  ParamsSpec params;
  SimSpec sim;

  bool operator==(const ScenarioFile&) const = default;

  const RegionSpec* find_region(const std::string& id) const;
  const InducedProblemSpec* find_problem(const std::string& label) const;
};

/// Validates structure, references and matrix definiteness, collecting every
/// issue before throwing SchemaError.
ScenarioFile parse_scenario(const nlohmann::json& doc);
ScenarioFile load_scenario(const std::filesystem::path& path);

nlohmann::json to_json(const ScenarioFile& scenario);

/// The bundled two-robot scenario (scenarios/golden_two_robot.json).
ScenarioFile golden_scenario();
const char* golden_scenario_text();

struct RunOverrides {
  std::optional<double> dt;
  std::optional<double> gamma;
  std::optional<double> rho;
  /// Replaces every complement margin, per-region ones included.
  std::optional<double> epsilon;
  std::optional<std::size_t> cycles;
  std::optional<double> max_time;
};

ScenarioFile apply_overrides(ScenarioFile scenario, const RunOverrides& overrides);

struct BuiltScenario {
  SimScenario sim;
  SimConfig config;
};

/// Throws SchemaError for values the parser accepts but the model rejects
/// (e.g. gamma <= 0 after an override).
BuiltScenario build(const ScenarioFile& scenario);

}  // namespace ftcbf
