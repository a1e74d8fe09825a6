#include "cfps/injection.hpp"

#include <algorithm>

#include "cfps/rng.hpp"

namespace cfps {

namespace {

constexpr std::array<std::string_view, 11> kErrorNames = {
    "drop_condition",     "implication_misuse", "or_and_confusion",     "partial_evaluation",
    "xor_as_or",          "xor_as_equiv",       "vacuous_truth_error",  "converse_error",
    "redundant_step",     "missing_prerequisite", "circular_reference"};

bool is_and_or(RuleTemplate t) {
  return t == RuleTemplate::AndAnte || t == RuleTemplate::AndCons || t == RuleTemplate::OrAnte ||
         t == RuleTemplate::OrCons;
}

bool has_direction(const std::vector<BoundPattern>& pats, Direction d) {
  return std::any_of(pats.begin(), pats.end(), [d](const BoundPattern& p) { return p.direction == d; });
}

std::vector<BoundPattern> patterns_of(const Step& s) { return matching_patterns(s.rule, s.supports, s.conclusion); }

bool in_antecedent(const Rule& r, FactId f) {
  const auto slot = r.slot_of(f);
  if (!slot) return false;
  switch (r.templ()) {
    case RuleTemplate::Impl:
    case RuleTemplate::AndCons:
    case RuleTemplate::OrCons: return *slot == Slot::A;
    case RuleTemplate::AndAnte:
    case RuleTemplate::OrAnte:
    case RuleTemplate::XorAnte: return *slot != Slot::C;
    case RuleTemplate::XorBare: return false;
  }
  return false;
}

// Supports with one antecedent value flipped so that the antecedent reads False.
std::optional<std::vector<Literal>> vacuous_supports(const Step& s) {
  if (!s.rule.is_implication() || !has_direction(patterns_of(s), Direction::Forward)) return std::nullopt;
  for (std::size_t i = 0; i < s.supports.size(); ++i) {
    if (!in_antecedent(s.rule, s.supports[i].fact)) continue;
    std::vector<Literal> out = s.supports;
    out[i] = out[i].negated();
    if (eval_expr(s.rule.antecedent(), State(out)) == TruthValue::False) return out;
  }
  return std::nullopt;
}

// Value of the known side for xor-shaped steps: the premise on the A/B slots.
std::optional<bool> xor_known_side(const Step& s) {
  const auto pats = patterns_of(s);
  if (pats.empty()) return std::nullopt;
  if (s.rule.templ() == RuleTemplate::XorBare) return pats.front().premises.front().value;
  if (s.rule.templ() == RuleTemplate::XorAnte) {
    for (const auto& p : pats) {
      if (p.direction != Direction::Backward) continue;
      for (const auto& l : p.premises)
        if (l.fact != s.rule.slot(Slot::C)) return l.value;
    }
  }
  return std::nullopt;
}

bool missing_bridge(const CorrectChain& c, int k) {
  if (k < 2 || k >= static_cast<int>(c.steps.size())) return false;
  const Step& bridge = c.steps[k - 1];
  const Step& consumer = c.steps[k];
  if (std::find(consumer.supports.begin(), consumer.supports.end(), bridge.conclusion) == consumer.supports.end())
    return false;
  std::vector<Literal> rest;
  for (const auto& l : consumer.supports)
    if (!(l == bridge.conclusion)) rest.push_back(l);
  return matching_patterns(consumer.rule, rest, consumer.conclusion).empty();
}

struct CircularRewire {
  int partner;  // 1-based index of the later step
  Step replacement;
};

std::vector<CircularRewire> circular_candidates(const CorrectChain& c, int k) {
  std::vector<CircularRewire> out;
  const Step& sk = c.steps[k - 1];
  const State prefix = procedural_state(c.base_facts, std::span(c.steps).first(k - 1));
  for (int m = k + 1; m <= static_cast<int>(c.steps.size()); ++m) {
    const Step& sm = c.steps[m - 1];
    if (std::find(sm.supports.begin(), sm.supports.end(), sk.conclusion) == sm.supports.end()) continue;
    for (const auto& q : licensed_patterns(sm.rule)) {
      if (!(q.derived == sk.conclusion)) continue;
      if (std::find(q.premises.begin(), q.premises.end(), sm.conclusion) == q.premises.end()) continue;
      const bool rest_ok = std::all_of(q.premises.begin(), q.premises.end(), [&](const Literal& l) {
        return l == sm.conclusion || prefix.holds(l);
      });
      if (!rest_ok) continue;
      Step rep{k, q.premises, sm.rule, sk.conclusion};
      std::sort(rep.supports.begin(), rep.supports.end(), [&](const Literal& a, const Literal& b) {
        return *sm.rule.slot_of(a.fact) < *sm.rule.slot_of(b.fact);
      });
      out.push_back({m, std::move(rep)});
      break;
    }
  }
  return out;
}

bool applicable(const CorrectChain& c, int k, ErrorType e) {
  const Step& s = c.steps[k - 1];
  const RuleTemplate t = s.rule.templ();
  const auto pats = patterns_of(s);
  if (pats.empty()) return false;
  switch (e) {
    case ErrorType::DropCondition: return is_and_or(t) && has_direction(pats, Direction::Backward);
    case ErrorType::PartialEvaluation: return is_and_or(t) && has_direction(pats, Direction::Forward);
    case ErrorType::OrAndConfusion: return is_and_or(t);
    case ErrorType::ImplicationMisuse: return s.rule.is_implication();
    case ErrorType::VacuousTruthError: return vacuous_supports(s).has_value();
    case ErrorType::XorAsOr: {
      auto side = xor_known_side(s);
      return side && *side;
    }
    case ErrorType::XorAsEquiv: {
      auto side = xor_known_side(s);
      return side && !*side;
    }
    case ErrorType::ConverseError: return t == RuleTemplate::Impl && has_direction(pats, Direction::Backward);
    case ErrorType::RedundantStep: return k >= 2;
    case ErrorType::MissingPrerequisite: return missing_bridge(c, k);
    case ErrorType::CircularReference: return !circular_candidates(c, k).empty();
  }
  return false;
}

void sort_by_slot(std::vector<Literal>& lits, const Rule& r) {
  std::sort(lits.begin(), lits.end(),
            [&](const Literal& a, const Literal& b) { return *r.slot_of(a.fact) < *r.slot_of(b.fact); });
}

}  // namespace

std::string_view to_string(ErrorType e) { return kErrorNames[static_cast<std::size_t>(e)]; }

std::optional<ErrorType> error_type_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kErrorNames.size(); ++i)
    if (kErrorNames[i] == name) return static_cast<ErrorType>(i);
  return std::nullopt;
}

ErrorGroup group_of(ErrorType e) {
  switch (e) {
    case ErrorType::ConverseError:
    case ErrorType::RedundantStep:
    case ErrorType::MissingPrerequisite:
    case ErrorType::CircularReference: return ErrorGroup::Structural;
    default: return ErrorGroup::TruthState;
  }
}

std::string_view to_string(ErrorGroup g) { return g == ErrorGroup::Structural ? "structural" : "truth_state"; }

const std::map<ErrorType, double>& default_error_weights() {
  static const std::map<ErrorType, double> w = {
      {ErrorType::XorAsEquiv, 3610},        {ErrorType::XorAsOr, 3609},
      {ErrorType::OrAndConfusion, 3598},    {ErrorType::DropCondition, 1934},
      {ErrorType::ImplicationMisuse, 1466}, {ErrorType::ConverseError, 1299},
      {ErrorType::RedundantStep, 1185},     {ErrorType::CircularReference, 946},
      {ErrorType::PartialEvaluation, 913},  {ErrorType::MissingPrerequisite, 869},
      {ErrorType::VacuousTruthError, 571}};
  return w;
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::NotApplicable: return "not-applicable";
    case RejectReason::Infeasible: return "infeasible";
    case RejectReason::StillDerivable: return "still-derivable";
    case RejectReason::DownstreamStuck: return "downstream-stuck";
    case RejectReason::LengthOutOfRange: return "length-out-of-range";
    case RejectReason::VerificationFailed: return "verification-failed";
  }
  return "unknown";
}

std::uint64_t RejectionStats::total_rejected() const {
  std::uint64_t n = 0;
  for (const auto& [r, c] : rejected) n += c;
  return n;
}

void RejectionStats::merge(const RejectionStats& o) {
  attempts += o.attempts;
  accepted += o.accepted;
  for (const auto& [r, c] : o.rejected) rejected[r] += c;
}

std::vector<ErrorType> applicable_errors(const CorrectChain& c, int k) {
  if (k < 1 || k > static_cast<int>(c.steps.size())) throw std::out_of_range("k outside the chain");
  std::vector<ErrorType> out;
  for (ErrorType e : kAllErrorTypes)
    if (applicable(c, k, e)) out.push_back(e);
  return out;
}

ErrorType sample_error_type(const std::map<ErrorType, double>& weights, std::span<const ErrorType> applicable,
                            std::uint64_t seed) {
  if (applicable.empty()) throw std::invalid_argument("no applicable error type");
  std::vector<double> w;
  for (ErrorType e : applicable) {
    auto it = weights.find(e);
    w.push_back(it == weights.end() ? 0.0 : it->second);
  }
  Rng rng(seed);
  return applicable[rng.categorical(w)];
}

std::vector<State> counterfactual_states(std::span<const Literal> base, std::span<const Step> steps) {
  std::vector<State> out;
  State st;
  for (const auto& l : base) st.overwrite(l);
  for (const auto& s : steps) {
    out.push_back(st);
    st.overwrite(s.conclusion);
  }
  return out;
}

Recomputed recompute_downstream(const CorrectChain& c, std::span<const Step> corrupted_prefix, int resume_from,
                                bool allow_step_drop) {
  State st;
  for (const auto& l : c.base_facts) st.overwrite(l);
  for (const auto& s : corrupted_prefix) st.overwrite(s.conclusion);

  Recomputed out;
  int next_index = static_cast<int>(corrupted_prefix.size()) + 1;
  for (int i = std::max(resume_from, 1); i <= static_cast<int>(c.steps.size()); ++i) {
    const Step& orig = c.steps[i - 1];
    const FactId target = orig.conclusion.fact;

    std::vector<BoundPattern> order;
    if (!st.known(target)) {
      order = patterns_of(orig);
      for (auto& p : licensed_patterns(orig.rule))
        if (p.derived.fact == target) order.push_back(std::move(p));
    }
    const BoundPattern* fired = nullptr;
    for (const auto& p : order) {
      if (std::all_of(p.premises.begin(), p.premises.end(), [&](const Literal& l) { return st.holds(l); })) {
        fired = &p;
        break;
      }
    }
    if (!fired) {
      if (!allow_step_drop)
        throw DownstreamStuck("downstream stuck at original step " + std::to_string(i));
      out.dropped.push_back(i);
      continue;
    }

    Step s{next_index++, fired->premises, orig.rule, fired->derived};
    for (const auto& l : orig.supports) {
      const bool present = std::any_of(s.supports.begin(), s.supports.end(), [&](const Literal& x) { return x.fact == l.fact; });
      if (!present && l.fact != target && st.known(l.fact)) s.supports.push_back({l.fact, st.get(l.fact) == TruthValue::True});
    }
    sort_by_slot(s.supports, s.rule);
    st.assign(s.conclusion);
    out.steps.push_back(std::move(s));
  }
  return out;
}

Recomputed recompute_downstream(const CorrectChain& c, std::span<const Step> corrupted_prefix) {
  return recompute_downstream(c, corrupted_prefix, static_cast<int>(corrupted_prefix.size()) + 1);
}

ErroneousChain inject(const CorrectChain& c, int k, ErrorType e, std::uint64_t seed, bool allow_step_drop) {
  if (k < 1 || k > static_cast<int>(c.steps.size())) throw std::out_of_range("k outside the chain");
  if (!applicable(c, k, e))
    throw InjectionInfeasible(std::string(to_string(e)) + " is not applicable at step " + std::to_string(k));

  Rng rng(seed);
  std::vector<Step> steps(c.steps.begin(), c.steps.begin() + (k - 1));
  const Step& orig = c.steps[k - 1];
  int resume = k + 1;

  switch (e) {
    case ErrorType::VacuousTruthError: {
      Step s = orig;
      s.supports = *vacuous_supports(orig);
      s.conclusion = orig.conclusion.negated();
      steps.push_back(std::move(s));
      break;
    }
    case ErrorType::ConverseError: {
      // B=F => A=F cited as B=T => A=T
      const FactId a = orig.rule.slot(Slot::A), b = orig.rule.slot(Slot::B);
      steps.push_back(Step{k, {{b, true}}, orig.rule, {a, true}});
      break;
    }
    case ErrorType::RedundantStep: {
      // prefer repeating a step whose conclusion was already used
      std::vector<int> used, all;
      for (int j = 1; j < k; ++j) {
        all.push_back(j);
        for (int m = j + 1; m < k; ++m) {
          const auto& sup = c.steps[m - 1].supports;
          if (std::find(sup.begin(), sup.end(), c.steps[j - 1].conclusion) != sup.end()) {
            used.push_back(j);
            break;
          }
        }
      }
      Step dup = c.steps[rng.pick(used.empty() ? all : used) - 1];
      dup.index = k;
      steps.push_back(std::move(dup));
      resume = k;
      break;
    }
    case ErrorType::MissingPrerequisite: {
      Step consumer = c.steps[k];
      std::erase(consumer.supports, orig.conclusion);
      consumer.index = k;
      steps.push_back(std::move(consumer));
      resume = k + 2;
      break;
    }
    case ErrorType::CircularReference: {
      auto cands = circular_candidates(c, k);
      steps.push_back(cands[rng.below(cands.size())].replacement);
      break;
    }
    default: {
      Step s = orig;
      s.conclusion = orig.conclusion.negated();
      steps.push_back(std::move(s));
      break;
    }
  }

  Recomputed down = recompute_downstream(c, steps, resume, allow_step_drop);
  ErroneousChain out;
  out.k = k;
  out.error_type = e;
  out.steps = std::move(steps);
  out.steps.insert(out.steps.end(), down.steps.begin(), down.steps.end());
  out.dropped = std::move(down.dropped);
  out.state_log = counterfactual_states(c.base_facts, out.steps);
  return out;
}

namespace {

bool missing_prerequisite_holds(const Step& s, const State& prefix) {
  if (!matching_patterns(s.rule, s.supports, s.conclusion).empty()) return false;
  for (const auto& p : licensed_patterns(s.rule)) {
    if (!(p.derived == s.conclusion)) continue;
    bool any_missing = false, ok = true;
    for (const auto& l : p.premises) {
      const bool cited = std::find(s.supports.begin(), s.supports.end(), l) != s.supports.end();
      if (cited) continue;
      if (prefix.known(l.fact)) ok = false;
      else any_missing = true;
    }
    if (ok && any_missing) return true;
  }
  return false;
}

bool converse_holds(const Step& s) {
  if (!matching_patterns(s.rule, s.supports, s.conclusion).empty()) return false;
  for (const auto& p : converse_patterns(s.rule)) {
    const bool covered = std::all_of(p.premises.begin(), p.premises.end(), [&](const Literal& l) {
      return std::find(s.supports.begin(), s.supports.end(), l) != s.supports.end();
    });
    if (covered && p.derived == s.conclusion) return true;
  }
  return false;
}

}  // namespace

FirstErrorReport verify_first_error(const Instance& inst) {
  FirstErrorReport r;
  const CorrectChain& c = inst.correct;
  const ErroneousChain& e = inst.erroneous;
  const int k = e.k;

  const auto base_report = verify_chain(c);
  for (const auto& f : base_report.failures) r.fail("correct chain: " + f);
  if (k < 1 || k > static_cast<int>(e.steps.size())) {
    r.fail("first error index " + std::to_string(k) + " outside the erroneous chain");
    return r;
  }
  if (!r.valid) return r;

  for (std::size_t t = 0; t < e.steps.size(); ++t)
    if (e.steps[t].index != static_cast<int>(t) + 1) r.fail("erroneous step " + std::to_string(t + 1) + " carries index " + std::to_string(e.steps[t].index));

  // (1) shared prefix
  for (int t = 1; t < k; ++t) {
    if (t > static_cast<int>(c.steps.size()) || !(e.steps[t - 1] == c.steps[t - 1]))
      r.fail("step " + std::to_string(t) + " differs from the correct chain before the first error");
  }
  if (!r.valid) return r;

  std::vector<Step> all_steps = c.steps;
  all_steps.insert(all_steps.end(), e.steps.begin(), e.steps.end());
  const auto facts = collect_facts(c.base_facts, c.rules, all_steps);
  std::optional<Prover> prover;
  try {
    prover.emplace(Theory::from(c.rules, facts));
  } catch (const UniverseTooLarge& ex) {
    r.fail(ex.what());
    return r;
  }

  // (2) prefix validity before k
  State prefix;
  for (const auto& l : c.base_facts) prefix.assign(l);
  for (int t = 1; t < k; ++t) {
    const auto a = assess_step(*prover, prefix, e.steps[t - 1]);
    if (!a.valid()) r.fail("step " + std::to_string(t) + " before the first error is invalid: " + a.describe());
    prefix.assign(e.steps[t - 1].conclusion);
  }

  const Step& sk = e.steps[k - 1];
  if (assess_step(*prover, prefix, sk).valid()) r.fail("step " + std::to_string(k) + " is prefix-valid");

  if (group_of(e.error_type) == ErrorGroup::TruthState) {
    // (3) corrupted conclusion must not follow from the original prefix
    if (k > static_cast<int>(c.steps.size()) || !(sk.rule == c.steps[k - 1].rule))
      r.fail("truth-state corruption changed the rule at step " + std::to_string(k));
    const bool covered = std::all_of(prefix.values().begin(), prefix.values().end(),
                                     [&](const auto& kv) { return prover->covers(kv.first); });
    const auto status = covered ? prover->entails(prefix, sk.conclusion).status : EntailmentStatus::Inconsistent;
    if (status == EntailmentStatus::Entailed) {
      r.still_derivable = true;
      r.fail("corrupted conclusion " + to_string(sk.conclusion) + " is still derivable from the prefix");
    } else if (status == EntailmentStatus::Inconsistent) {
      r.fail("prefix before step " + std::to_string(k) + " is inconsistent");
    }
  } else {
    // (4) structural predicates
    switch (e.error_type) {
      case ErrorType::ConverseError:
        if (!converse_holds(sk)) r.fail("step " + std::to_string(k) + " does not apply a converse direction");
        break;
      case ErrorType::RedundantStep:
        if (!prefix.holds(sk.conclusion)) r.fail("step " + std::to_string(k) + " does not repeat an established conclusion");
        break;
      case ErrorType::MissingPrerequisite:
        if (!missing_prerequisite_holds(sk, prefix))
          r.fail("step " + std::to_string(k) + " does not skip an unestablished prerequisite");
        break;
      case ErrorType::CircularReference: {
        const auto cyc = steps_on_cycles(e.steps);
        if (std::find(cyc.begin(), cyc.end(), k) == cyc.end())
          r.fail("step " + std::to_string(k) + " is not on a dependency cycle");
        break;
      }
      default: break;
    }
  }

  // (5) counterfactual coherence downstream
  const auto states = counterfactual_states(c.base_facts, e.steps);
  for (std::size_t t = static_cast<std::size_t>(k); t < e.steps.size(); ++t) {
    const Step& s = e.steps[t];
    const bool held = std::all_of(s.supports.begin(), s.supports.end(), [&](const Literal& l) { return states[t].holds(l); });
    if (!held || matching_patterns(s.rule, s.supports, s.conclusion).empty())
      r.fail("downstream step " + std::to_string(t + 1) + " does not follow a licensed pattern under the corrupted state");
  }

  if (!(e.steps.back().conclusion.fact == c.goal.fact)) r.fail("erroneous chain does not end on the goal fact");
  return r;
}

CounterfactualResult build_counterfactual(const CorrectChain& c, const CounterfactualConfig& cfg, std::uint64_t seed,
                                          std::optional<ErrorType> only) {
  CounterfactualResult res;
  Rng rng(seed);
  const int lo = std::max(cfg.k_min, 1);
  const int hi = static_cast<int>(c.steps.size()) - cfg.k_tail;

  std::vector<int> positions;
  for (int k = lo; k <= hi; ++k)
    if (!only || applicable(c, k, *only)) positions.push_back(k);
  if (positions.empty()) {
    res.stats.reject(RejectReason::NotApplicable);
    return res;
  }

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const int k = rng.pick(positions);
    std::vector<ErrorType> app = applicable_errors(c, k);
    if (only) app = std::find(app.begin(), app.end(), *only) != app.end() ? std::vector<ErrorType>{*only} : std::vector<ErrorType>{};
    std::erase_if(app, [&](ErrorType e) {
      auto it = cfg.weights.find(e);
      return it == cfg.weights.end() || !(it->second > 0.0);
    });
    if (app.empty()) {
      res.stats.reject(RejectReason::NotApplicable);
      continue;
    }
    const ErrorType e = sample_error_type(cfg.weights, app, rng.next());

    Instance inst;
    inst.correct = c;
    inst.seed = seed;
    try {
      inst.erroneous = inject(c, k, e, rng.next(), cfg.allow_step_drop);
    } catch (const InjectionInfeasible&) {
      res.stats.reject(RejectReason::Infeasible);
      continue;
    } catch (const DownstreamStuck&) {
      res.stats.reject(RejectReason::DownstreamStuck);
      continue;
    }
    const auto n = static_cast<int>(inst.erroneous.steps.size());
    if (n < cfg.min_steps || n > cfg.max_steps) {
      res.stats.reject(RejectReason::LengthOutOfRange);
      continue;
    }
    const auto report = verify_first_error(inst);
    if (!report.valid) {
      res.stats.reject(report.still_derivable ? RejectReason::StillDerivable : RejectReason::VerificationFailed);
      continue;
    }
    res.stats.accept();
    res.instance = std::move(inst);
    return res;
  }
  return res;
}

}  // namespace cfps
