// Counterfactual instance data model shared by injection, dataset, realization and eval.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfps/chain.hpp"

namespace cfps {

enum class ErrorType : std::uint8_t {
  DropCondition,
  ImplicationMisuse,
  OrAndConfusion,
  PartialEvaluation,
  XorAsOr,
  XorAsEquiv,
  VacuousTruthError,
  ConverseError,
  RedundantStep,
  MissingPrerequisite,
  CircularReference,
};

inline constexpr std::array<ErrorType, 11> kAllErrorTypes = {
    ErrorType::DropCondition,     ErrorType::ImplicationMisuse, ErrorType::OrAndConfusion,
    ErrorType::PartialEvaluation, ErrorType::XorAsOr,           ErrorType::XorAsEquiv,
    ErrorType::VacuousTruthError, ErrorType::ConverseError,     ErrorType::RedundantStep,
    ErrorType::MissingPrerequisite, ErrorType::CircularReference};

enum class ErrorGroup : std::uint8_t { TruthState, Structural };

std::string_view to_string(ErrorType e);
std::optional<ErrorType> error_type_from_string(std::string_view name);
ErrorGroup group_of(ErrorType e);
std::string_view to_string(ErrorGroup g);

/// Published per-type counts of the reference 20k corpus, used as default sampling weights.
const std::map<ErrorType, double>& default_error_weights();

struct ErroneousChain {
  std::vector<Step> steps;
  int k = 0;  // 1-based first error position, on this chain's own indexing
  ErrorType error_type = ErrorType::DropCondition;
  /// state_log[t] is the counterfactual state before step t+1.
  std::vector<State> state_log;
  /// Original step indices dropped during permissive recomputation.
  std::vector<int> dropped;

  friend bool operator==(const ErroneousChain&, const ErroneousChain&) = default;
};

struct ContextProfile {
  std::string name;
  std::string background;
  friend bool operator==(const ContextProfile&, const ContextProfile&) = default;
};

struct PredicateEntry {
  std::string predicate;
  std::string positive;
  std::string negative;
  friend bool operator==(const PredicateEntry&, const PredicateEntry&) = default;
};

using PredicateMap = std::map<FactId, PredicateEntry>;

struct NlRecord {
  std::string mode;  // annotated | clean
  std::string goal;
  std::vector<std::string> base_facts;
  std::vector<std::string> rules;
  std::vector<std::string> correct_steps;
  std::vector<std::string> erroneous_steps;
  PredicateMap predicates;
  friend bool operator==(const NlRecord&, const NlRecord&) = default;
};

struct Instance {
  std::string id;
  ContextProfile context;
  CorrectChain correct;
  ErroneousChain erroneous;
  std::uint64_t seed = 0;
  std::optional<NlRecord> nl;
  /// Record fields this version does not know, kept as raw JSON text.
  std::map<std::string, std::string> extensions;

  const Literal& goal() const { return correct.goal; }
  const std::vector<Literal>& base_facts() const { return correct.base_facts; }
  const std::vector<Rule>& rules() const { return correct.rules; }
  int k() const { return erroneous.k; }
  ErrorType error_type() const { return erroneous.error_type; }

  friend bool operator==(const Instance&, const Instance&) = default;
};

}  // namespace cfps
