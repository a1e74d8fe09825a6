// Entailment over small fact universes.
//
// The backend enumerates every total assignment of the universe as a bit
// vector (bit i = assignment i), so each rule becomes a few word-wide logical
// operations over precomputed atom columns. Unit propagation over the
// licensed-pattern catalog is provided as a sound, incomplete fast path.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfps/logic.hpp"
#include "cfps/step.hpp"

namespace cfps {

inline constexpr std::size_t kDefaultUniverseCap = 24;

struct Theory {
  std::vector<Rule> rules;
  std::vector<FactId> universe;  // sorted, unique

  /// Universe = facts of `rules` plus `extra`.
  static Theory from(std::vector<Rule> rules, std::span<const FactId> extra = {});
};

class UniverseTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InconsistentPrefix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PropagationContradiction : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EntailmentStatus { Entailed, NotEntailed, Inconsistent };

struct EntailmentResult {
  EntailmentStatus status = EntailmentStatus::Inconsistent;
  std::optional<State> witness;  // countermodel, present iff NotEntailed
};

/// Set of total assignments over a universe of n facts.
class ModelSet {
 public:
  ModelSet(std::size_t vars, std::vector<std::uint64_t> words) : vars_(vars), words_(std::move(words)) {}

  std::uint64_t count() const;
  bool empty() const;
  /// Keep only assignments where `var` has `value`.
  void restrict(std::size_t var, bool value);
  /// True if some model assigns `value` to `var`.
  bool any_with(std::size_t var, bool value) const;
  /// Index of the first model with `var` = `value`.
  std::optional<std::uint64_t> first_with(std::size_t var, bool value) const;

  std::size_t vars() const { return vars_; }

 private:
  std::size_t vars_;
  std::vector<std::uint64_t> words_;
};

/// Answers queries against one theory; immutable after construction.
class Prover {
 public:
  explicit Prover(Theory th, std::size_t cap = kDefaultUniverseCap);

  const Theory& theory() const { return th_; }
  bool covers(FactId f) const;

  /// Models of the rules that extend `s`. Facts of `s` must be in the universe.
  ModelSet models(const State& s) const;
  std::uint64_t count_models(const State& s) const { return models(s).count(); }
  EntailmentResult entails(const State& s, const Literal& q) const;
  EntailmentStatus entails_status(const ModelSet& m, const Literal& q) const;

  /// Supports and conclusion all entailed by the prefix. Throws InconsistentPrefix.
  bool check_step_semantic(const State& prefix, const Step& step) const;

 private:
  std::size_t var_of(FactId f) const;
  State assignment(std::uint64_t index) const;

  Theory th_;
  std::vector<std::uint64_t> rule_models_;
};

std::uint64_t count_models(const Theory& th, const State& s, std::size_t cap = kDefaultUniverseCap);
EntailmentResult entails(const Theory& th, const State& s, const Literal& q, std::size_t cap = kDefaultUniverseCap);
bool check_step_semantic(const Theory& th, const State& prefix, const Step& step);

// --- licensed inference patterns -------------------------------------------

enum class Direction { Forward, Backward };

struct SlotValue {
  Slot slot;
  bool value;
  friend bool operator==(const SlotValue&, const SlotValue&) = default;
};

/// A sound derivation direction of a rule template.
struct InferencePattern {
  RuleTemplate templ;
  std::vector<SlotValue> premises;
  SlotValue derived;
  Direction direction;
};

/// A pattern bound to the facts of a concrete rule.
struct BoundPattern {
  std::vector<Literal> premises;
  Literal derived;
  Direction direction;
  std::size_t catalog_index;  // position within pattern_catalog(templ)
};

const std::vector<InferencePattern>& pattern_catalog(RuleTemplate t);
std::vector<BoundPattern> licensed_patterns(const Rule& r);

/// The two converse applications of an IMPL rule (affirming the consequent,
/// denying the antecedent). Empty for every other template.
std::vector<BoundPattern> converse_patterns(const Rule& r);

/// Re-checks every catalog pattern against slot-level enumeration.
/// Returns false if any pattern is unsound.
bool verify_pattern_catalog();

/// Least fixpoint of all licensed patterns of `th.rules` applied to `s`.
State propagate(const Theory& th, const State& s);

/// Patterns of `rule` whose derived literal is `conclusion` and whose
/// premises are all contained in `supports`.
std::vector<BoundPattern> matching_patterns(const Rule& rule, std::span<const Literal> supports,
                                            const Literal& conclusion);

}  // namespace cfps
