#include "ftcbf/task.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "ftcbf/error.hpp"

namespace ftcbf {

void Workspace::add(AtomicProposition prop, double epsilon, double weight) {
  if (index_.contains(prop.id)) {
    throw PreconditionError(fmt::format("duplicate proposition id '{}'", prop.id));
  }
  if (!(epsilon > 0.0)) {
    throw DomainError(fmt::format("proposition '{}': epsilon must be > 0", prop.id));
  }
  if (!(weight > 0.0)) {
    throw DomainError(fmt::format("proposition '{}': weight must be > 0", prop.id));
  }
  index_.emplace(prop.id, entries_.size());
  entries_.push_back(Entry{std::move(prop), epsilon, weight});
}

const Workspace::Entry& Workspace::at(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) {
    throw PreconditionError(fmt::format("unknown proposition id '{}'", id));
  }
  return entries_[it->second];
}

bool Workspace::contains(const std::string& id) const { return index_.contains(id); }

PropositionSet Workspace::ids() const {
  PropositionSet out;
  for (const auto& e : entries_) out.insert(e.prop.id);
  return out;
}

PropositionSet Workspace::valuation(const StackedState& x) const {
  PropositionSet out;
  for (const auto& e : entries_) {
    if (holds(e.prop, x)) out.insert(e.prop.id);
  }
  return out;
}

namespace {

PropositionSet set_minus(const PropositionSet& a, const PropositionSet& b) {
  PropositionSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

PropositionSet intersect(const PropositionSet& a, const PropositionSet& b) {
  PropositionSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(out, out.end()));
  return out;
}

BarrierFunction complement_of(const Workspace::Entry& e) {
  return BarrierFunction::complement("!" + e.prop.id, e.prop.barrier, e.epsilon);
}

}  // namespace

ReachabilityProblem induce_problem(const InducedProblemSpec& spec, const Workspace& workspace) {
  if (!intersect(spec.a1_true, spec.a1_false).empty() ||
      !intersect(spec.a2_true, spec.a2_false).empty()) {
    throw PreconditionError(
        fmt::format("problem '{}': a proposition is required both true and false", spec.label));
  }
  for (const auto* set : {&spec.a1_true, &spec.a1_false, &spec.a2_true, &spec.a2_false}) {
    for (const auto& id : *set) {
      if (!workspace.contains(id)) {
        throw PreconditionError(
            fmt::format("problem '{}': unknown proposition id '{}'", spec.label, id));
      }
    }
  }

  std::vector<WeightedBarrier> goals;
  for (const auto& id : set_minus(spec.a2_true, spec.a1_true)) {
    const auto& e = workspace.at(id);
    goals.push_back({e.prop.barrier, e.weight});
  }
  for (const auto& id : set_minus(spec.a2_false, spec.a1_false)) {
    const auto& e = workspace.at(id);
    goals.push_back({complement_of(e), e.weight});
  }
  if (goals.empty()) {
    throw PreconditionError(fmt::format("problem '{}': goal set is empty", spec.label));
  }

  std::vector<BarrierFunction> safety;
  for (const auto& id : intersect(spec.a1_true, spec.a2_true)) {
    safety.push_back(workspace.at(id).prop.barrier);
  }
  for (const auto& id : intersect(spec.a1_false, spec.a2_false)) {
    safety.push_back(complement_of(workspace.at(id)));
  }
  return ReachabilityProblem{spec.label, CompositeGoalSpec(std::move(goals)), std::move(safety)};
}

bool Waypoint::matches(const PropositionSet& valuation) const {
  return std::includes(valuation.begin(), valuation.end(), positive.begin(), positive.end()) &&
         intersect(valuation, negative).empty();
}

Waypoint waypoint_of(const InducedProblemSpec& spec) { return {spec.a2_true, spec.a2_false}; }

LassoSequence::LassoSequence(std::vector<ReachabilityProblem> prefix,
                             std::vector<ReachabilityProblem> suffix)
    : prefix_(std::move(prefix)), suffix_(std::move(suffix)) {
  if (suffix_.empty()) {
    throw PreconditionError("lasso suffix must contain at least one problem");
  }
}

const ReachabilityProblem& LassoSequence::at(std::size_t k) const {
  if (k < prefix_.size()) return prefix_[k];
  return suffix_[(k - prefix_.size()) % suffix_.size()];
}

std::size_t LassoSequence::completed_cycles(std::size_t k) const {
  if (k < prefix_.size()) return 0;
  return (k - prefix_.size()) / suffix_.size();
}

void TraceRecord::record(PropositionSet valuation, double t) {
  if (samples_ > 0 && !(t > last_time_)) {
    throw PreconditionError(
        fmt::format("trace sample at t = {} does not follow t = {}", t, last_time_));
  }
  ++samples_;
  last_time_ = t;
  if (entries_.empty() || entries_.back().set != valuation) {
    entries_.push_back(TraceEntry{std::move(valuation), t});
  }
}

TraceRecord record_sample(TraceRecord trace, const StackedState& x, double t,
                          const Workspace& workspace) {
  trace.record(workspace.valuation(x), t);
  return trace;
}

std::vector<TraceEntry> compress(const std::vector<TraceEntry>& samples) {
  std::vector<TraceEntry> out;
  for (const auto& s : samples) {
    if (out.empty() || out.back().set != s.set) out.push_back(s);
  }
  return out;
}

LassoVerdict check_lasso(const TraceRecord& trace, const std::vector<Waypoint>& prefix,
                         const std::vector<Waypoint>& suffix, std::size_t min_cycles) {
  if (min_cycles < 1) {
    throw PreconditionError("min_cycles must be >= 1");
  }
  if (suffix.empty()) {
    throw PreconditionError("lasso suffix must contain at least one waypoint");
  }
  const auto& entries = trace.entries();
  LassoVerdict verdict;
  std::size_t cursor = 0;  // next trace entry available for matching
  std::size_t matched = 0;

  const auto take = [&](const Waypoint& w) {
    while (cursor < entries.size()) {
      if (w.matches(entries[cursor++].set)) return true;
    }
    return false;
  };

  for (const auto& w : prefix) {
    if (!take(w)) {
      verdict.first_mismatch = matched;
      verdict.message = fmt::format("prefix waypoint {} never reached", matched);
      return verdict;
    }
    ++matched;
  }
  verdict.prefix_matched = true;

  // Count every complete suffix repetition present in the trace.
  for (;;) {
    std::size_t in_cycle = 0;
    for (; in_cycle < suffix.size(); ++in_cycle) {
      if (!take(suffix[in_cycle])) break;
    }
    if (in_cycle < suffix.size()) {
      if (verdict.cycles_matched < min_cycles) {
        verdict.first_mismatch = matched + in_cycle;
        verdict.mismatch_cycle = verdict.cycles_matched + 1;
      }
      break;
    }
    ++verdict.cycles_matched;
    matched += suffix.size();
  }

  verdict.accepted = verdict.cycles_matched >= min_cycles;
  verdict.message =
      verdict.accepted
          ? fmt::format("accepted (omega-approximate): {} suffix cycles, {} required",
                        verdict.cycles_matched, min_cycles)
          : fmt::format("rejected at suffix cycle {} (waypoint {}): {} of {} cycles",
                        verdict.mismatch_cycle, *verdict.first_mismatch, verdict.cycles_matched,
                        min_cycles);
  return verdict;
}

std::string to_string(Membership m) {
  switch (m) {
    case Membership::kInGoal: return "in_goal";
    case Membership::kInSafety: return "in_safety";
    case Membership::kBoth: return "both";
    case Membership::kNeither: return "neither";
  }
  return "unknown";
}

bool in_goal(const StackedState& x, const ReachabilityProblem& problem, double margin) {
  for (const auto* h : problem.goals.all()) {
    if (!(h->eval(x) >= margin)) return false;
  }
  return true;
}

bool in_safety(const StackedState& x, const ReachabilityProblem& problem) {
  return std::all_of(problem.safety.begin(), problem.safety.end(),
                     [&](const BarrierFunction& h) { return h.eval(x) >= 0.0; });
}

Membership membership(const StackedState& x, const ReachabilityProblem& problem) {
  const bool goal = in_goal(x, problem);
  const bool safe = in_safety(x, problem);
  if (goal && safe) return Membership::kBoth;
  if (goal) return Membership::kInGoal;
  if (safe) return Membership::kInSafety;
  return Membership::kNeither;
}

}  // namespace ftcbf
