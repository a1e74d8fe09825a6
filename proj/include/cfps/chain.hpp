// Correct-chain synthesis by backward goal expansion, and the step/chain
// validity checks shared by the verifier and the reference judge.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfps/logic.hpp"
#include "cfps/prover.hpp"
#include "cfps/step.hpp"

namespace cfps {

struct SynthesisConfig {
  int min_steps = 7;
  int max_steps = 10;
  std::map<RuleTemplate, double> template_weights = {
      {RuleTemplate::Impl, 1.0},   {RuleTemplate::AndAnte, 1.0}, {RuleTemplate::AndCons, 1.0},
      {RuleTemplate::OrAnte, 1.0}, {RuleTemplate::OrCons, 1.0},  {RuleTemplate::XorAnte, 1.0},
      {RuleTemplate::XorBare, 1.0}};
  std::size_t max_facts = 16;
  int max_attempts = 200;
  double p_fresh = 0.7;
  /// Rules true in the hidden world but unused by the chain.
  int distractor_rules = 0;
  /// Goal must not follow from the base facts with fewer rules than this.
  int min_useful_steps = 3;
  /// Chance of citing the non-premise slot of OR_ANTE / AND_CONS as an extra support.
  double p_extra_support = 0.35;

  void validate() const;
};

struct CorrectChain {
  std::vector<Literal> base_facts;
  std::vector<Rule> rules;
  std::vector<Step> steps;
  Literal goal;

  friend bool operator==(const CorrectChain&, const CorrectChain&) = default;
};

class SynthesisExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CycleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Local validity of one step against a prefix.
struct StepAssessment {
  bool rule_in_theory = false;
  bool well_formed = false;      // supports/conclusion over rule facts, conclusion not among supports
  bool established = false;     // every support holds in the procedural prefix state
  bool licensed = false;         // some licensed pattern: premises within supports, derives the conclusion
  bool new_conclusion = false;   // conclusion fact not yet established
  bool semantic = false;         // supports and conclusion entailed by the prefix
  bool inconsistent_prefix = false;

  bool procedural() const { return rule_in_theory && well_formed && established && licensed && new_conclusion; }
  bool valid() const { return procedural() && semantic; }
  std::string describe() const;
};

/// `prefix` is the procedural state: base facts plus earlier conclusions.
StepAssessment assess_step(const Prover& prover, const State& prefix, const Step& step);

/// All facts mentioned by rules, base facts, and the given steps.
std::vector<FactId> collect_facts(std::span<const Literal> base, std::span<const Rule> rules,
                                  std::span<const Step> steps);

/// Base facts plus the conclusions of `steps`. Throws std::logic_error on conflict.
State procedural_state(std::span<const Literal> base, std::span<const Step> steps);

struct VerificationReport {
  bool valid = true;
  std::vector<std::string> failures;

  void fail(std::string msg) {
    valid = false;
    failures.push_back(std::move(msg));
  }
};

CorrectChain synthesize_chain(const SynthesisConfig& cfg, std::uint64_t seed);
VerificationReport verify_chain(const CorrectChain& c);

/// Dependency-respecting order of step indices (1-based); ties by original index.
std::vector<int> topological_order(std::span<const Step> steps);
inline std::vector<int> topological_order(const CorrectChain& c) { return topological_order(c.steps); }

/// Step indices that lie on a dependency cycle (support of one step is the conclusion of another).
std::vector<int> steps_on_cycles(std::span<const Step> steps);

/// Smallest number of rules whose conjunction with the base facts entails the
/// goal, searched up to `limit`; returns limit + 1 if none is small enough.
int min_rules_for_goal(const CorrectChain& c, int limit);

}  // namespace cfps
