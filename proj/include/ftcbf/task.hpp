#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ftcbf/barrier.hpp"
#include "ftcbf/problem.hpp"

namespace ftcbf {

using PropositionSet = std::set<std::string>;

/// The atomic propositions of a multi-agent system, with the per-proposition
/// complement margin and composite weight used when problems are induced.
class Workspace {
 public:
  struct Entry {
    AtomicProposition prop;
    double epsilon = kDefaultComplementEpsilon;
    double weight = 1.0;
  };

  /// Throws PreconditionError on a duplicate id.
  void add(AtomicProposition prop, double epsilon = kDefaultComplementEpsilon,
           double weight = 1.0);

  /// Throws PreconditionError on an unknown id.
  const Entry& at(const std::string& id) const;
  bool contains(const std::string& id) const;

  const std::vector<Entry>& entries() const { return entries_; }
  PropositionSet ids() const;

  /// Every proposition that holds at x. The unique a with x in [[a]].
  PropositionSet valuation(const StackedState& x) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Propositions true/false before (a1) and after (a2) a reachability objective.
struct InducedProblemSpec {
  std::string label;
  PropositionSet a1_true;
  PropositionSet a1_false;
  PropositionSet a2_true;
  PropositionSet a2_false;

  bool operator==(const InducedProblemSpec&) const = default;
};

/// Goal: h_pi for pi in a2_true \ a1_true, complements for a2_false \ a1_false.
/// Safety: h_pi for pi in a1_true & a2_true, complements for a1_false & a2_false.
/// Throws PreconditionError on overlapping true/false sets, unknown ids, or an
/// empty goal.
ReachabilityProblem induce_problem(const InducedProblemSpec& spec, const Workspace& workspace);

/// A state requirement on a trace entry: every `positive` proposition holds
/// and no `negative` one does.
struct Waypoint {
  PropositionSet positive;
  PropositionSet negative;

  bool matches(const PropositionSet& valuation) const;
  bool operator==(const Waypoint&) const = default;
};

/// The set of propositions an induced problem makes true and false on completion.
Waypoint waypoint_of(const InducedProblemSpec& spec);

/// R_1..R_k (R_{k+1}..R_{k+l})^omega.
class LassoSequence {
 public:
  /// Throws PreconditionError if `suffix` is empty.
  LassoSequence(std::vector<ReachabilityProblem> prefix, std::vector<ReachabilityProblem> suffix);

  const std::vector<ReachabilityProblem>& prefix() const { return prefix_; }
  const std::vector<ReachabilityProblem>& suffix() const { return suffix_; }

  /// Problem at position `k` of the unrolled sequence.
  const ReachabilityProblem& at(std::size_t k) const;

  /// Number of suffix cycles fully completed once `k` problems are done.
  std::size_t completed_cycles(std::size_t k) const;

 private:
  std::vector<ReachabilityProblem> prefix_;
  std::vector<ReachabilityProblem> suffix_;
};

struct TraceEntry {
  PropositionSet set;
  double time = 0.0;

  bool operator==(const TraceEntry&) const = default;
};

/// Compressed sequence of valuations: consecutive entries always differ and
/// enter times strictly increase.
class TraceRecord {
 public:
  /// Appends an entry when `valuation` differs from the last one. Throws
  /// PreconditionError unless t exceeds the previous sample time.
  void record(PropositionSet valuation, double t);

  const std::vector<TraceEntry>& entries() const { return entries_; }
  std::size_t sample_count() const { return samples_; }

  bool operator==(const TraceRecord&) const = default;

 private:
  std::vector<TraceEntry> entries_;
  std::size_t samples_ = 0;
  double last_time_ = 0.0;
};

TraceRecord record_sample(TraceRecord trace, const StackedState& x, double t,
                          const Workspace& workspace);

/// Drops consecutive repeats from a raw sample sequence.
std::vector<TraceEntry> compress(const std::vector<TraceEntry>& samples);

inline constexpr std::size_t kDefaultMinCycles = 2;

struct LassoVerdict {
  bool accepted = false;
  /// Always true: finite runs can only approximate omega-repetition.
  bool omega_approximate = true;
  bool prefix_matched = false;
  std::size_t cycles_matched = 0;
  /// Index of the first unmatched waypoint in the unrolled sequence
  /// prefix, suffix, suffix, ... (set only on reject).
  std::optional<std::size_t> first_mismatch;
  /// 1-based suffix cycle of the mismatch (0 = in the prefix).
  std::size_t mismatch_cycle = 0;
  std::string message;

  bool operator==(const LassoVerdict&) const = default;
};

/// Greedy subsequence match of prefix then suffix repetitions. Each waypoint
/// consumes one trace entry strictly after the previous match. Throws
/// PreconditionError if min_cycles < 1 or the suffix is empty.
LassoVerdict check_lasso(const TraceRecord& trace, const std::vector<Waypoint>& prefix,
                         const std::vector<Waypoint>& suffix,
                         std::size_t min_cycles = kDefaultMinCycles);

enum class Membership { kInGoal, kInSafety, kBoth, kNeither };

std::string to_string(Membership m);

/// Goal iff every goal barrier >= 0; safety iff every safety barrier >= 0.
Membership membership(const StackedState& x, const ReachabilityProblem& problem);

bool in_goal(const StackedState& x, const ReachabilityProblem& problem, double margin = 0.0);
bool in_safety(const StackedState& x, const ReachabilityProblem& problem);

}  // namespace ftcbf
