#include "ftcbf/scenario.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

namespace ftcbf {

using nlohmann::json;

namespace {

std::string join_issues(const std::vector<SchemaIssue>& issues) {
  std::string out = "scenario schema violation";
  for (const auto& issue : issues) {
    out += fmt::format("\n  {}: {}", issue.pointer.empty() ? "/" : issue.pointer, issue.message);
  }
  return out;
}

std::string escape_key(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

std::string child(const std::string& ptr, const std::string& key) {
  return ptr + "/" + escape_key(key);
}

std::string child(const std::string& ptr, std::size_t index) {
  return fmt::format("{}/{}", ptr, index);
}

const char* type_name(const json& j) { return j.type_name(); }

class Reader {
 public:
  void fail(std::string ptr, std::string message) {
    issues_.push_back({std::move(ptr), std::move(message)});
  }

  const std::vector<SchemaIssue>& issues() const { return issues_; }

  bool expect_object(const json& j, const std::string& ptr,
                     std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      fail(ptr, fmt::format("expected an object, got {}", type_name(j)));
      return false;
    }
    const std::set<std::string> known(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) fail(child(ptr, key), "unknown key");
    }
    return true;
  }

  const json* member(const json& obj, const std::string& ptr, const char* key, bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(child(ptr, key), "required key is missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& j, const std::string& ptr) {
    if (!j.is_number()) {
      fail(ptr, fmt::format("expected a number, got {}", type_name(j)));
      return std::nullopt;
    }
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      fail(ptr, "number must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::size_t> index(const json& j, const std::string& ptr) {
    if (j.is_number_unsigned()) return j.get<std::size_t>();
    if (j.is_number_integer()) {
      fail(ptr, "expected a non-negative integer");
    } else {
      fail(ptr, fmt::format("expected a non-negative integer, got {}", type_name(j)));
    }
    return std::nullopt;
  }

  std::optional<std::string> string(const json& j, const std::string& ptr) {
    if (!j.is_string()) {
      fail(ptr, fmt::format("expected a string, got {}", type_name(j)));
      return std::nullopt;
    }
    return j.get<std::string>();
  }

  std::optional<std::string> id(const json& j, const std::string& ptr) {
    auto s = string(j, ptr);
    if (s && s->empty()) {
      fail(ptr, "id must not be empty");
      return std::nullopt;
    }
    // Ids end up in CSV cells and ';'-joined lists.
    if (s && s->find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.") !=
                 std::string::npos) {
      fail(ptr, fmt::format("id '{}' may only use letters, digits, '_', '-' and '.'", *s));
      return std::nullopt;
    }
    return s;
  }

  std::vector<double> numbers(const json& j, const std::string& ptr) {
    std::vector<double> out;
    if (!j.is_array()) {
      fail(ptr, fmt::format("expected an array of numbers, got {}", type_name(j)));
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (auto v = number(j[i], child(ptr, i))) out.push_back(*v);
    }
    return out;
  }

  std::vector<std::string> strings(const json& j, const std::string& ptr) {
    std::vector<std::string> out;
    if (!j.is_array()) {
      fail(ptr, fmt::format("expected an array of strings, got {}", type_name(j)));
      return out;
    }
    for (std::size_t i = 0; i < j.size(); ++i) {
      if (auto v = string(j[i], child(ptr, i))) out.push_back(*v);
    }
    return out;
  }

  const json& array(const json& j, const std::string& ptr) {
    static const json empty = json::array();
    if (!j.is_array()) {
      fail(ptr, fmt::format("expected an array, got {}", type_name(j)));
      return empty;
    }
    return j;
  }

 private:
  std::vector<SchemaIssue> issues_;
};

void read_agents(Reader& r, const json& j, AgentsSpec& out) {
  const std::string ptr = "/agents";
  if (!r.expect_object(j, ptr, {"count", "dimension", "initial_positions"})) return;
  if (const auto* v = r.member(j, ptr, "count", true)) {
    if (auto n = r.index(*v, ptr + "/count")) out.count = *n;
  }
  if (const auto* v = r.member(j, ptr, "dimension", true)) {
    if (auto n = r.index(*v, ptr + "/dimension")) out.dimension = *n;
  }
  if (out.count == 0) r.fail(ptr + "/count", "at least one agent is required");
  if (out.dimension == 0) r.fail(ptr + "/dimension", "dimension must be >= 1");
  if (const auto* v = r.member(j, ptr, "initial_positions", true)) {
    const std::string p = ptr + "/initial_positions";
    const auto& arr = r.array(*v, p);
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.initial_positions.push_back(r.numbers(arr[i], child(p, i)));
    }
  }
}

void read_workspace(Reader& r, const json& j, std::optional<WorkspaceBounds>& out) {
  const std::string ptr = "/workspace";
  if (!r.expect_object(j, ptr, {"lower", "upper"})) return;
  WorkspaceBounds w;
  if (const auto* v = r.member(j, ptr, "lower", true)) w.lower = r.numbers(*v, ptr + "/lower");
  if (const auto* v = r.member(j, ptr, "upper", true)) w.upper = r.numbers(*v, ptr + "/upper");
  out = std::move(w);
}

void read_regions(Reader& r, const json& j, std::vector<RegionSpec>& out) {
  const std::string ptr = "/regions";
  const auto& arr = r.array(j, ptr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = child(ptr, i);
    if (!r.expect_object(arr[i], p, {"id", "center", "shape", "epsilon"})) continue;
    RegionSpec region;
    if (const auto* v = r.member(arr[i], p, "id", true)) region.id = r.id(*v, p + "/id").value_or("");
    if (const auto* v = r.member(arr[i], p, "center", true)) region.center = r.numbers(*v, p + "/center");
    if (const auto* v = r.member(arr[i], p, "shape", true)) region.shape = r.numbers(*v, p + "/shape");
    if (const auto* v = r.member(arr[i], p, "epsilon", false)) region.epsilon = r.number(*v, p + "/epsilon");
    out.push_back(std::move(region));
  }
}

void read_globals(Reader& r, const json& j, std::vector<ConnectivitySpec>& out) {
  const std::string ptr = "/global_constraints";
  const auto& arr = r.array(j, ptr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = child(ptr, i);
    if (!r.expect_object(arr[i], p, {"id", "type", "delta1", "delta2", "pair"})) continue;
    ConnectivitySpec c;
    if (const auto* v = r.member(arr[i], p, "id", true)) c.id = r.id(*v, p + "/id").value_or("");
    if (const auto* v = r.member(arr[i], p, "type", true)) {
      const auto type = r.string(*v, p + "/type");
      if (type && *type != "connectivity") {
        r.fail(p + "/type", fmt::format("unsupported constraint type '{}'", *type));
      }
    }
    if (const auto* v = r.member(arr[i], p, "delta1", true)) c.delta1 = r.number(*v, p + "/delta1").value_or(0.0);
    if (const auto* v = r.member(arr[i], p, "delta2", true)) c.delta2 = r.number(*v, p + "/delta2").value_or(0.0);
    if (const auto* v = r.member(arr[i], p, "pair", true)) {
      const std::string pp = p + "/pair";
      if (!v->is_array() || v->size() != 2) {
        r.fail(pp, "expected two agent indices");
      } else {
        c.first = r.index((*v)[0], pp + "/0").value_or(0);
        c.second = r.index((*v)[1], pp + "/1").value_or(1);
      }
    }
    out.push_back(std::move(c));
  }
}

void read_propositions(Reader& r, const json& j, std::vector<PropositionSpec>& out) {
  const std::string ptr = "/propositions";
  const auto& arr = r.array(j, ptr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = child(ptr, i);
    if (!r.expect_object(arr[i], p, {"id", "region", "agent", "global", "bounded_above"})) continue;
    PropositionSpec prop;
    if (const auto* v = r.member(arr[i], p, "id", true)) prop.id = r.id(*v, p + "/id").value_or("");
    if (const auto* v = r.member(arr[i], p, "region", false)) prop.region = r.id(*v, p + "/region");
    if (const auto* v = r.member(arr[i], p, "agent", false)) prop.agent = r.index(*v, p + "/agent");
    if (const auto* v = r.member(arr[i], p, "global", false)) prop.global = r.id(*v, p + "/global");
    const bool has_region = arr[i].contains("region") || arr[i].contains("agent");
    const bool has_global = arr[i].contains("global");
    if (has_region && has_global) {
      r.fail(p, "bind either region + agent or global, not both");
    } else if (!has_global && !(arr[i].contains("region") && arr[i].contains("agent"))) {
      r.fail(p, "a proposition needs region + agent or global");
    }
    if (const auto* v = r.member(arr[i], p, "bounded_above", false)) {
      if (v->is_null()) {
        prop.bounded_above = nullptr;
      } else if (auto m = r.number(*v, p + "/bounded_above")) {
        if (*m > 0.0) {
          prop.bounded_above = *m;
        } else {
          r.fail(p + "/bounded_above", "bound must be > 0");
        }
      }
    }
    out.push_back(std::move(prop));
  }
}

void read_problems(Reader& r, const json& j, std::vector<InducedProblemSpec>& out) {
  const std::string ptr = "/problems";
  const auto& arr = r.array(j, ptr);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string p = child(ptr, i);
    if (!r.expect_object(arr[i], p, {"label", "a1_true", "a1_false", "a2_true", "a2_false"})) {
      continue;
    }
    InducedProblemSpec spec;
    if (const auto* v = r.member(arr[i], p, "label", true)) spec.label = r.id(*v, p + "/label").value_or("");
    const auto read_set = [&](const char* key, PropositionSet& set) {
      if (const auto* v = r.member(arr[i], p, key, false)) {
        const std::string kp = child(p, key);
        const auto ids = r.strings(*v, kp);  // resolved against proposition ids later
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (!set.insert(ids[k]).second) r.fail(child(kp, k), fmt::format("duplicate id '{}'", ids[k]));
        }
      }
    };
    read_set("a1_true", spec.a1_true);
    read_set("a1_false", spec.a1_false);
    read_set("a2_true", spec.a2_true);
    read_set("a2_false", spec.a2_false);
    out.push_back(std::move(spec));
  }
}

void read_lasso(Reader& r, const json& j, LassoSpec& out) {
  const std::string ptr = "/lasso";
  if (!r.expect_object(j, ptr, {"prefix", "suffix"})) return;
  if (const auto* v = r.member(j, ptr, "prefix", false)) out.prefix = r.strings(*v, ptr + "/prefix");
  if (const auto* v = r.member(j, ptr, "suffix", true)) out.suffix = r.strings(*v, ptr + "/suffix");
}

void read_params(Reader& r, const json& j, ParamsSpec& out) {
  const std::string ptr = "/params";
  if (!r.expect_object(j, ptr, {"gamma", "rho", "epsilon", "alpha"})) return;
  if (const auto* v = r.member(j, ptr, "gamma", false)) out.gamma = r.number(*v, ptr + "/gamma").value_or(out.gamma);
  if (const auto* v = r.member(j, ptr, "rho", false)) out.rho = r.number(*v, ptr + "/rho").value_or(out.rho);
  if (const auto* v = r.member(j, ptr, "epsilon", false)) out.epsilon = r.number(*v, ptr + "/epsilon").value_or(out.epsilon);
  if (const auto* v = r.member(j, ptr, "alpha", false)) {
    if (!v->is_object()) {
      r.fail(ptr + "/alpha", fmt::format("expected an object, got {}", type_name(*v)));
    } else {
      for (const auto& [key, value] : v->items()) {
        if (auto w = r.number(value, child(ptr + "/alpha", key))) out.alpha[key] = *w;
      }
    }
  }
}

void read_sim(Reader& r, const json& j, SimSpec& out) {
  const std::string ptr = "/sim";
  if (!r.expect_object(j, ptr, {"dt", "max_time", "suffix_cycles_target", "goal_switch_margin"})) return;
  if (const auto* v = r.member(j, ptr, "dt", false)) out.dt = r.number(*v, ptr + "/dt").value_or(out.dt);
  if (const auto* v = r.member(j, ptr, "max_time", false)) out.max_time = r.number(*v, ptr + "/max_time").value_or(out.max_time);
  if (const auto* v = r.member(j, ptr, "suffix_cycles_target", false)) {
    out.suffix_cycles_target = r.index(*v, ptr + "/suffix_cycles_target").value_or(out.suffix_cycles_target);
  }
  if (const auto* v = r.member(j, ptr, "goal_switch_margin", false)) {
    out.goal_switch_margin = r.number(*v, ptr + "/goal_switch_margin").value_or(out.goal_switch_margin);
  }
}

// Checks that depend on more than one section, plus value ranges.
void check_semantics(Reader& r, const ScenarioFile& s) {
  const std::size_t n = s.agents.dimension;
  if (s.agents.initial_positions.size() != s.agents.count) {
    r.fail("/agents/initial_positions",
           fmt::format("expected {} positions, got {}", s.agents.count, s.agents.initial_positions.size()));
  }
  for (std::size_t i = 0; i < s.agents.initial_positions.size(); ++i) {
    if (s.agents.initial_positions[i].size() != n) {
      r.fail(child("/agents/initial_positions", i), fmt::format("expected {} coordinates", n));
    }
  }
  if (s.workspace) {
    if (s.workspace->lower.size() != n) r.fail("/workspace/lower", fmt::format("expected {} coordinates", n));
    if (s.workspace->upper.size() != n) r.fail("/workspace/upper", fmt::format("expected {} coordinates", n));
    if (s.workspace->lower.size() == n && s.workspace->upper.size() == n) {
      for (std::size_t d = 0; d < n; ++d) {
        if (!(s.workspace->lower[d] < s.workspace->upper[d])) {
          r.fail(child("/workspace/upper", d), "upper must exceed lower");
        }
      }
    }
  }

  std::set<std::string> region_ids;
  for (std::size_t i = 0; i < s.regions.size(); ++i) {
    const auto& region = s.regions[i];
    const std::string p = child("/regions", i);
    if (!region.id.empty() && !region_ids.insert(region.id).second) {
      r.fail(p + "/id", fmt::format("duplicate region id '{}'", region.id));
    }
    if (region.center.size() != n) r.fail(p + "/center", fmt::format("expected {} coordinates", n));
    if (region.epsilon && !(*region.epsilon > 0.0)) r.fail(p + "/epsilon", "epsilon must be > 0");
    if (region.shape.size() != n * n) {
      r.fail(p + "/shape", fmt::format("expected {} entries (row-major {}x{})", n * n, n, n));
      continue;
    }
    const auto dim = static_cast<Eigen::Index>(n);
    const Matrix shape = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        region.shape.data(), dim, dim);
    if ((shape - shape.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, shape.cwiseAbs().maxCoeff())) {
      r.fail(p + "/shape", "matrix must be symmetric");
    } else if (Eigen::SelfAdjointEigenSolver<Matrix>(shape, Eigen::EigenvaluesOnly).eigenvalues().minCoeff() <= 0.0) {
      r.fail(p + "/shape", "matrix must be positive definite");
    }
  }

  std::set<std::string> global_ids;
  for (std::size_t i = 0; i < s.global_constraints.size(); ++i) {
    const auto& c = s.global_constraints[i];
    const std::string p = child("/global_constraints", i);
    if (!c.id.empty() && !global_ids.insert(c.id).second) {
      r.fail(p + "/id", fmt::format("duplicate constraint id '{}'", c.id));
    }
    if (c.first >= s.agents.count) r.fail(p + "/pair/0", "agent index out of range");
    if (c.second >= s.agents.count) r.fail(p + "/pair/1", "agent index out of range");
    if (c.first == c.second) r.fail(p + "/pair", "pair must name two distinct agents");
  }

  std::set<std::string> prop_ids;
  for (std::size_t i = 0; i < s.propositions.size(); ++i) {
    const auto& prop = s.propositions[i];
    const std::string p = child("/propositions", i);
    if (!prop.id.empty() && !prop_ids.insert(prop.id).second) {
      r.fail(p + "/id", fmt::format("duplicate proposition id '{}'", prop.id));
    }
    if (prop.region && !region_ids.count(*prop.region)) {
      r.fail(p + "/region", fmt::format("unknown region '{}'", *prop.region));
    }
    if (prop.agent && *prop.agent >= s.agents.count) r.fail(p + "/agent", "agent index out of range");
    if (prop.global && !global_ids.count(*prop.global)) {
      r.fail(p + "/global", fmt::format("unknown global constraint '{}'", *prop.global));
    }
  }

  std::set<std::string> labels;
  for (std::size_t i = 0; i < s.problems.size(); ++i) {
    const auto& spec = s.problems[i];
    const std::string p = child("/problems", i);
    if (!spec.label.empty() && !labels.insert(spec.label).second) {
      r.fail(p + "/label", fmt::format("duplicate problem label '{}'", spec.label));
    }
    const auto check_ids = [&](const char* key, const PropositionSet& set) {
      for (const auto& id : set) {
        if (!prop_ids.count(id)) r.fail(child(p, key), fmt::format("unknown proposition '{}'", id));
      }
    };
    check_ids("a1_true", spec.a1_true);
    check_ids("a1_false", spec.a1_false);
    check_ids("a2_true", spec.a2_true);
    check_ids("a2_false", spec.a2_false);
    const auto check_disjoint = [&](const char* key, const PropositionSet& t, const PropositionSet& f) {
      for (const auto& id : t) {
        if (f.count(id)) r.fail(child(p, key), fmt::format("'{}' is both true and false", id));
      }
    };
    check_disjoint("a1_false", spec.a1_true, spec.a1_false);
    check_disjoint("a2_false", spec.a2_true, spec.a2_false);
    bool has_goal = false;
    for (const auto& id : spec.a2_true) has_goal = has_goal || !spec.a1_true.count(id);
    for (const auto& id : spec.a2_false) has_goal = has_goal || !spec.a1_false.count(id);
    if (!has_goal) r.fail(p, "problem has an empty goal (a2 adds nothing to a1)");
  }

  const auto check_labels = [&](const char* key, const std::vector<std::string>& seq) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      if (!labels.count(seq[i])) {
        r.fail(child(child("/lasso", key), i), fmt::format("unknown problem '{}'", seq[i]));
      }
    }
  };
  check_labels("prefix", s.lasso.prefix);
  check_labels("suffix", s.lasso.suffix);
  if (s.lasso.suffix.empty()) r.fail("/lasso/suffix", "suffix must not be empty");

  if (!(s.params.gamma > 0.0)) r.fail("/params/gamma", "gamma must be > 0");
  if (!(s.params.rho >= 0.0 && s.params.rho < 1.0)) r.fail("/params/rho", "rho must lie in [0, 1)");
  if (!(s.params.epsilon > 0.0)) r.fail("/params/epsilon", "epsilon must be > 0");
  for (const auto& [id, weight] : s.params.alpha) {
    const std::string p = child("/params/alpha", id);
    if (!prop_ids.count(id)) r.fail(p, fmt::format("unknown proposition '{}'", id));
    if (!(weight > 0.0)) r.fail(p, "weight must be > 0");
  }

  if (!(s.sim.dt > 0.0)) r.fail("/sim/dt", "dt must be > 0");
  if (!(s.sim.max_time >= s.sim.dt)) r.fail("/sim/max_time", "max_time must be >= dt");
  if (s.sim.suffix_cycles_target < 1) r.fail("/sim/suffix_cycles_target", "must be >= 1");
  if (!(s.sim.goal_switch_margin >= 0.0)) r.fail("/sim/goal_switch_margin", "must be >= 0");
}

}  // namespace

SchemaError::SchemaError(std::vector<SchemaIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

const RegionSpec* ScenarioFile::find_region(const std::string& id) const {
  for (const auto& region : regions) {
    if (region.id == id) return &region;
  }
  return nullptr;
}

const InducedProblemSpec* ScenarioFile::find_problem(const std::string& label) const {
  for (const auto& problem : problems) {
    if (problem.label == label) return &problem;
  }
  return nullptr;
}

ScenarioFile parse_scenario(const json& doc) {
  Reader r;
  ScenarioFile s;
  if (!r.expect_object(doc, "", {"name", "ltl_comment", "agents", "workspace", "regions",
                                 "global_constraints", "propositions", "problems", "lasso",
                                 "params", "sim"})) {
    throw SchemaError(r.issues());
  }
  if (const auto* v = r.member(doc, "", "name", false)) s.name = r.string(*v, "/name").value_or("");
  if (const auto* v = r.member(doc, "", "ltl_comment", false)) {
    s.ltl_comment = r.string(*v, "/ltl_comment").value_or("");
  }
  if (const auto* v = r.member(doc, "", "agents", true)) read_agents(r, *v, s.agents);
  if (const auto* v = r.member(doc, "", "workspace", false)) read_workspace(r, *v, s.workspace);
  if (const auto* v = r.member(doc, "", "regions", false)) read_regions(r, *v, s.regions);
  if (const auto* v = r.member(doc, "", "global_constraints", false)) read_globals(r, *v, s.global_constraints);
  if (const auto* v = r.member(doc, "", "propositions", true)) read_propositions(r, *v, s.propositions);
  if (const auto* v = r.member(doc, "", "problems", true)) read_problems(r, *v, s.problems);
  if (const auto* v = r.member(doc, "", "lasso", true)) read_lasso(r, *v, s.lasso);
  if (const auto* v = r.member(doc, "", "params", false)) read_params(r, *v, s.params);
  if (const auto* v = r.member(doc, "", "sim", false)) read_sim(r, *v, s.sim);
  if (r.issues().empty()) check_semantics(r, s);
  if (!r.issues().empty()) throw SchemaError(r.issues());
  return s;
}

ScenarioFile load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PreconditionError(fmt::format("cannot open scenario '{}'", path.string()));
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError({{"", fmt::format("invalid JSON: {}", e.what())}});
  }
  return parse_scenario(doc);
}

json to_json(const ScenarioFile& s) {
  json doc;
  doc["name"] = s.name;
  doc["ltl_comment"] = s.ltl_comment;
  doc["agents"] = {{"count", s.agents.count},
                   {"dimension", s.agents.dimension},
                   {"initial_positions", s.agents.initial_positions}};
  if (s.workspace) doc["workspace"] = {{"lower", s.workspace->lower}, {"upper", s.workspace->upper}};
  doc["regions"] = json::array();
  for (const auto& region : s.regions) {
    json j = {{"id", region.id}, {"center", region.center}, {"shape", region.shape}};
    if (region.epsilon) j["epsilon"] = *region.epsilon;
    doc["regions"].push_back(std::move(j));
  }
  doc["global_constraints"] = json::array();
  for (const auto& c : s.global_constraints) {
    doc["global_constraints"].push_back({{"id", c.id},
                                         {"type", "connectivity"},
                                         {"delta1", c.delta1},
                                         {"delta2", c.delta2},
                                         {"pair", {c.first, c.second}}});
  }
  doc["propositions"] = json::array();
  for (const auto& prop : s.propositions) {
    json j = {{"id", prop.id}};
    if (prop.region) j["region"] = *prop.region;
    if (prop.agent) j["agent"] = *prop.agent;
    if (prop.global) j["global"] = *prop.global;
    if (std::holds_alternative<std::nullptr_t>(prop.bounded_above)) {
      j["bounded_above"] = nullptr;
    } else if (const auto* m = std::get_if<double>(&prop.bounded_above)) {
      j["bounded_above"] = *m;
    }
    doc["propositions"].push_back(std::move(j));
  }
  doc["problems"] = json::array();
  for (const auto& p : s.problems) {
    doc["problems"].push_back({{"label", p.label},
                               {"a1_true", p.a1_true},
                               {"a1_false", p.a1_false},
                               {"a2_true", p.a2_true},
                               {"a2_false", p.a2_false}});
  }
  doc["lasso"] = {{"prefix", s.lasso.prefix}, {"suffix", s.lasso.suffix}};
  doc["params"] = {{"gamma", s.params.gamma},
                   {"rho", s.params.rho},
                   {"epsilon", s.params.epsilon},
                   {"alpha", json::object()}};
  for (const auto& [id, w] : s.params.alpha) doc["params"]["alpha"][id] = w;
  doc["sim"] = {{"dt", s.sim.dt},
                {"max_time", s.sim.max_time},
                {"suffix_cycles_target", s.sim.suffix_cycles_target},
                {"goal_switch_margin", s.sim.goal_switch_margin}};
  return doc;
}

ScenarioFile golden_scenario() { return parse_scenario(json::parse(golden_scenario_text())); }

ScenarioFile apply_overrides(ScenarioFile s, const RunOverrides& o) {
  if (o.dt) s.sim.dt = *o.dt;
  if (o.gamma) s.params.gamma = *o.gamma;
  if (o.rho) s.params.rho = *o.rho;
  if (o.epsilon) {
    s.params.epsilon = *o.epsilon;
    for (auto& region : s.regions) region.epsilon.reset();
  }
  if (o.cycles) s.sim.suffix_cycles_target = *o.cycles;
  if (o.max_time) s.sim.max_time = *o.max_time;
  // Re-run validation so overridden values get the same checks as file values.
  return parse_scenario(to_json(s));
}

BuiltScenario build(const ScenarioFile& s) {
  const std::size_t n = s.agents.dimension;
  const auto dim = static_cast<Eigen::Index>(n);
  Workspace workspace;
  std::vector<SchemaIssue> issues;
  for (std::size_t i = 0; i < s.propositions.size(); ++i) {
    const auto& prop = s.propositions[i];
    try {
      std::optional<BarrierFunction> barrier;
      double epsilon = s.params.epsilon;
      if (prop.global) {
        for (const auto& c : s.global_constraints) {
          if (c.id == *prop.global) {
            barrier = BarrierFunction::connectivity(prop.id, {c.first, c.second}, {c.delta1, c.delta2});
          }
        }
      } else {
        const auto* region = s.find_region(*prop.region);
        const Vector center = Eigen::Map<const Vector>(region->center.data(), dim);
        const Matrix shape =
            Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                region->shape.data(), dim, dim);
        barrier = BarrierFunction::quadratic(prop.id, *prop.agent, QuadraticRegion(center, shape));
        if (region->epsilon) epsilon = *region->epsilon;
      }
      if (std::holds_alternative<std::nullptr_t>(prop.bounded_above)) {
        barrier = barrier->with_bound(std::nullopt);
      } else if (const auto* m = std::get_if<double>(&prop.bounded_above)) {
        barrier = barrier->with_bound(*m);
      }
      const auto alpha = s.params.alpha.find(prop.id);
      workspace.add({prop.id, *barrier}, epsilon, alpha == s.params.alpha.end() ? 1.0 : alpha->second);
    } catch (const Error& e) {
      issues.push_back({child("/propositions", i), e.what()});
    }
  }
  if (!issues.empty()) throw SchemaError(issues);

  const auto induce = [&](const std::vector<std::string>& labels, const char* key) {
    std::vector<ReachabilityProblem> problems;
    std::vector<Waypoint> waypoints;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto* spec = s.find_problem(labels[i]);
      try {
        problems.push_back(induce_problem(*spec, workspace));
        waypoints.push_back(waypoint_of(*spec));
      } catch (const Error& e) {
        issues.push_back({child(child("/lasso", key), i), e.what()});
      }
    }
    return std::pair{std::move(problems), std::move(waypoints)};
  };
  auto [prefix, prefix_waypoints] = induce(s.lasso.prefix, "prefix");
  auto [suffix, suffix_waypoints] = induce(s.lasso.suffix, "suffix");
  if (!issues.empty()) throw SchemaError(issues);

  Vector flat(static_cast<Eigen::Index>(s.agents.count * n));
  for (std::size_t i = 0; i < s.agents.count; ++i) {
    for (std::size_t d = 0; d < n; ++d) {
      flat(static_cast<Eigen::Index>(i * n + d)) = s.agents.initial_positions[i][d];
    }
  }

  SimConfig config;
  config.dt = s.sim.dt;
  config.max_time = s.sim.max_time;
  config.params = FtcbfParams(s.params.gamma, s.params.rho);
  config.goal_switch_margin = s.sim.goal_switch_margin;
  config.suffix_cycles_target = s.sim.suffix_cycles_target;

  return {SimScenario{std::move(workspace), LassoSequence(std::move(prefix), std::move(suffix)),
                      std::move(prefix_waypoints), std::move(suffix_waypoints),
                      StackedState(s.agents.count, n, std::move(flat)),
                      ControlAffineDynamics::single_integrator(s.agents.count, n)},
          config};
}

}  // namespace ftcbf
