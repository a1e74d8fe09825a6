#include "cfps/chain.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <optional>
#include <queue>
#include <set>

#include "cfps/rng.hpp"

namespace cfps {

void SynthesisConfig::validate() const {
  if (min_steps < 3 || max_steps > 12 || min_steps > max_steps)
    throw std::invalid_argument("step range must lie within [3, 12]");
  bool any = false;
  for (const auto& [t, w] : template_weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("template weight must be non-negative");
    any = any || w > 0.0;
  }
  if (!any) throw std::invalid_argument("no rule template has positive weight");
  if (max_facts < 3 || max_facts > kDefaultUniverseCap) throw std::invalid_argument("max_facts must lie within [3, 24]");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be positive");
  if (p_fresh < 0.0 || p_fresh > 1.0) throw std::invalid_argument("p_fresh must lie within [0, 1]");
  if (p_extra_support < 0.0 || p_extra_support > 1.0)
    throw std::invalid_argument("p_extra_support must lie within [0, 1]");
  if (distractor_rules < 0) throw std::invalid_argument("distractor_rules must be non-negative");
  if (min_useful_steps < 1) throw std::invalid_argument("min_useful_steps must be positive");
}

std::string StepAssessment::describe() const {
  std::vector<std::string> parts;
  if (!rule_in_theory) parts.push_back("rule not in theory");
  if (!well_formed) parts.push_back("malformed step");
  if (!established) parts.push_back("support not established");
  if (!licensed) parts.push_back("no licensed pattern");
  if (!new_conclusion) parts.push_back("conclusion already established");
  if (inconsistent_prefix) parts.push_back("inconsistent prefix");
  else if (!semantic) parts.push_back("not entailed by prefix");
  if (parts.empty()) return "valid";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += "; " + parts[i];
  return out;
}

StepAssessment assess_step(const Prover& prover, const State& prefix, const Step& step) {
  StepAssessment a;
  const auto& rules = prover.theory().rules;
  a.rule_in_theory = std::find(rules.begin(), rules.end(), step.rule) != rules.end();

  a.well_formed = step.rule.mentions(step.conclusion.fact);
  std::set<FactId> seen;
  for (const auto& s : step.supports) {
    if (!step.rule.mentions(s.fact) || s.fact == step.conclusion.fact || !seen.insert(s.fact).second)
      a.well_formed = false;
  }

  a.established = std::all_of(step.supports.begin(), step.supports.end(),
                              [&](const Literal& l) { return prefix.holds(l); });
  a.licensed = !matching_patterns(step.rule, step.supports, step.conclusion).empty();
  a.new_conclusion = !prefix.known(step.conclusion.fact);

  bool covered = prover.covers(step.conclusion.fact);
  for (const auto& s : step.supports) covered = covered && prover.covers(s.fact);
  for (const auto& [f, v] : prefix.values()) covered = covered && prover.covers(f);
  if (covered) {
    try {
      a.semantic = prover.check_step_semantic(prefix, step);
    } catch (const InconsistentPrefix&) {
      a.inconsistent_prefix = true;
    }
  }
  return a;
}

std::vector<FactId> collect_facts(std::span<const Literal> base, std::span<const Rule> rules,
                                  std::span<const Step> steps) {
  std::set<FactId> facts;
  for (const auto& l : base) facts.insert(l.fact);
  for (const auto& r : rules)
    for (FactId f : r.facts()) facts.insert(f);
  for (const auto& s : steps) {
    for (const auto& l : s.supports) facts.insert(l.fact);
    for (FactId f : s.rule.facts()) facts.insert(f);
    facts.insert(s.conclusion.fact);
  }
  return {facts.begin(), facts.end()};
}

State procedural_state(std::span<const Literal> base, std::span<const Step> steps) {
  State s;
  for (const auto& l : base) s.assign(l);
  for (const auto& st : steps) s.assign(st.conclusion);
  return s;
}

namespace {

using LitKey = std::pair<std::uint32_t, bool>;
LitKey key(const Literal& l) { return {l.fact.index, l.value}; }

// adjacency: edges[j] lists consumers of step j's conclusion (0-based)
std::vector<std::vector<int>> dependency_edges(std::span<const Step> steps) {
  std::map<LitKey, std::vector<int>> producers;
  for (std::size_t j = 0; j < steps.size(); ++j) producers[key(steps[j].conclusion)].push_back(static_cast<int>(j));
  std::vector<std::vector<int>> edges(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (const auto& s : steps[i].supports) {
      auto it = producers.find(key(s));
      if (it == producers.end()) continue;
      for (int j : it->second)
        if (j != static_cast<int>(i)) edges[j].push_back(static_cast<int>(i));
    }
  }
  return edges;
}

}  // namespace

std::vector<int> topological_order(std::span<const Step> steps) {
  const auto edges = dependency_edges(steps);
  std::vector<int> indeg(steps.size(), 0);
  for (const auto& out : edges)
    for (int i : out) ++indeg[i];
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (indeg[i] == 0) ready.push(static_cast<int>(i));
  std::vector<int> order;
  while (!ready.empty()) {
    int j = ready.top();
    ready.pop();
    order.push_back(j + 1);
    for (int i : edges[j])
      if (--indeg[i] == 0) ready.push(i);
  }
  if (order.size() != steps.size()) throw CycleError("dependency cycle among steps");
  return order;
}

std::vector<int> steps_on_cycles(std::span<const Step> steps) {
  const auto edges = dependency_edges(steps);
  const std::size_t n = steps.size();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (std::size_t j = 0; j < n; ++j)
    for (int i : edges[j]) reach[j][i] = true;
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t a = 0; a < n; ++a)
      if (reach[a][m])
        for (std::size_t b = 0; b < n; ++b)
          if (reach[m][b]) reach[a][b] = true;
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i)
    if (reach[i][i]) out.push_back(static_cast<int>(i) + 1);
  return out;
}

int min_rules_for_goal(const CorrectChain& c, int limit) {
  const auto facts = collect_facts(c.base_facts, c.rules, c.steps);
  State base;
  for (const auto& l : c.base_facts) base.assign(l);
  const std::size_t n = c.rules.size();
  for (int size = 0; size <= limit && static_cast<std::size_t>(size) <= n; ++size) {
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + size, true);
    do {
      std::vector<Rule> subset;
      for (std::size_t i = 0; i < n; ++i)
        if (pick[i]) subset.push_back(c.rules[i]);
      Prover p(Theory::from(std::move(subset), facts));
      if (p.entails(base, c.goal).status == EntailmentStatus::Entailed) return size;
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  return limit + 1;
}

VerificationReport verify_chain(const CorrectChain& c) {
  VerificationReport r;
  if (c.steps.empty()) {
    r.fail("chain has no steps");
    return r;
  }
  const auto facts = collect_facts(c.base_facts, c.rules, c.steps);
  std::optional<Prover> prover;
  try {
    prover.emplace(Theory::from(c.rules, facts));
  } catch (const UniverseTooLarge& e) {
    r.fail(e.what());
    return r;
  }

  State st;
  for (const auto& l : c.base_facts) {
    if (st.known(l.fact) && !st.holds(l)) {
      r.fail("base facts conflict on " + to_string(l.fact));
      return r;
    }
    st.assign(l);
  }
  if (prover->count_models(st) == 0) {
    r.fail("rules are inconsistent with the base facts");
    return r;
  }

  std::set<FactId> concluded;
  for (std::size_t i = 0; i < c.steps.size(); ++i) {
    const Step& s = c.steps[i];
    const std::string tag = "step " + std::to_string(i + 1);
    if (s.index != static_cast<int>(i) + 1) r.fail(tag + ": carries index " + std::to_string(s.index));
    if (!concluded.insert(s.conclusion.fact).second) r.fail(tag + ": fact concluded twice");
    const auto a = assess_step(*prover, st, s);
    if (!a.valid()) r.fail(tag + ": " + a.describe());
    if (!st.known(s.conclusion.fact)) st.assign(s.conclusion);
  }

  try {
    (void)topological_order(c.steps);
  } catch (const CycleError& e) {
    r.fail(e.what());
  }

  if (!(c.steps.back().conclusion == c.goal)) r.fail("final conclusion differs from the goal");
  State base;
  for (const auto& l : c.base_facts) base.assign(l);
  if (prover->entails(base, c.goal).status != EntailmentStatus::Entailed)
    r.fail("goal is not entailed by the base facts and rules");
  return r;
}

// --- synthesis ---------------------------------------------------------------

namespace {

constexpr std::array<Slot, 3> kSlots = {Slot::A, Slot::B, Slot::C};

struct Proto {
  Rule rule;
  std::vector<Literal> supports;
  Literal conclusion;
};

class Builder {
 public:
  Builder(const SynthesisConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {
    for (auto t : kAllTemplates) {
      auto it = cfg.template_weights.find(t);
      weights_.push_back(it == cfg.template_weights.end() ? 0.0 : it->second);
    }
  }

  std::optional<CorrectChain> attempt() {
    world_.clear();
    derived_by_.clear();
    open_.clear();
    protos_.clear();

    const auto target = static_cast<std::size_t>(rng_.between(cfg_.min_steps, cfg_.max_steps));
    const bool goal_value = rng_.chance(0.5);
    const Literal goal{fresh(goal_value), goal_value};
    open_.push_back(goal);
    while (protos_.size() < target) {
      if (open_.empty()) return std::nullopt;
      const auto i = rng_.below(open_.size());
      const Literal g = open_[i];
      open_.erase(open_.begin() + static_cast<std::ptrdiff_t>(i));
      if (!expand(g)) return std::nullopt;
    }
    return assemble(goal);
  }

 private:
  FactId fresh(bool value) {
    world_.push_back(value);
    derived_by_.push_back(-1);
    return FactId{static_cast<std::uint32_t>(world_.size() - 1)};
  }
  bool can_add() const { return world_.size() < cfg_.max_facts; }
  bool w(FactId f) const { return world_[f.index]; }

  State world_state(std::span<const FactId> facts) const {
    State s;
    for (FactId f : facts) s.assign({f, w(f)});
    return s;
  }

  bool expand(const Literal& goal) {
    for (int tries = 0; tries < 12; ++tries) {
      const RuleTemplate t = kAllTemplates[rng_.categorical(weights_)];
      std::vector<std::size_t> options;
      const auto& cat = pattern_catalog(t);
      for (std::size_t i = 0; i < cat.size(); ++i)
        if (cat[i].derived.value == goal.value) options.push_back(i);
      if (options.empty()) continue;
      const auto& pat = cat[rng_.pick(options)];

      const std::size_t mark = world_.size();
      derived_by_[goal.fact.index] = static_cast<int>(protos_.size());
      std::vector<Literal> new_open;
      if (auto p = instantiate(t, pat, goal, new_open)) {
        protos_.push_back(std::move(*p));
        open_.insert(open_.end(), new_open.begin(), new_open.end());
        return true;
      }
      derived_by_[goal.fact.index] = -1;
      world_.resize(mark);
      derived_by_.resize(mark);
    }
    return false;
  }

  // Existing facts usable as a premise with world value `value`.
  std::vector<FactId> reusable(bool value, const std::array<std::optional<FactId>, 3>& taken) const {
    std::vector<FactId> out;
    for (std::uint32_t i = 0; i < world_.size(); ++i) {
      const FactId f{i};
      if (derived_by_[i] != -1 || world_[i] != value) continue;
      if (std::any_of(taken.begin(), taken.end(), [&](const auto& t) { return t && *t == f; })) continue;
      out.push_back(f);
    }
    return out;
  }

  std::optional<Proto> instantiate(RuleTemplate t, const InferencePattern& pat, const Literal& goal,
                                   std::vector<Literal>& new_open) {
    std::array<std::optional<FactId>, 3> slot_fact;
    slot_fact[static_cast<std::size_t>(pat.derived.slot)] = goal.fact;
    std::vector<Literal> supports;

    for (const auto& prem : pat.premises) {
      auto candidates = reusable(prem.value, slot_fact);
      FactId f;
      if (can_add() && (candidates.empty() || rng_.chance(cfg_.p_fresh))) {
        f = fresh(prem.value);
        new_open.push_back({f, prem.value});
      } else if (!candidates.empty()) {
        f = rng_.pick(candidates);
      } else {
        return std::nullopt;
      }
      slot_fact[static_cast<std::size_t>(prem.slot)] = f;
      supports.push_back({f, prem.value});
    }

    // remaining slot: any fact whose world value keeps the rule true
    const int arity = slot_count(t);
    std::optional<Slot> extra_slot;
    for (int s = 0; s < arity; ++s) {
      if (slot_fact[s]) continue;
      extra_slot = kSlots[s];
      std::vector<bool> allowed;
      for (bool v : {false, true}) {
        const FactId probe{static_cast<std::uint32_t>(world_.size())};
        auto trial = slot_fact;
        trial[s] = probe;
        const Rule r = make_rule(t, trial, arity);
        State st;
        for (int q = 0; q < arity; ++q) st.assign({*trial[q], *trial[q] == probe ? v : w(*trial[q])});
        if (eval_rule(r, st) == TruthValue::True) allowed.push_back(v);
      }
      if (allowed.empty()) return std::nullopt;
      std::vector<FactId> candidates;
      for (std::uint32_t i = 0; i < world_.size(); ++i) {
        const FactId f{i};
        if (std::any_of(slot_fact.begin(), slot_fact.end(), [&](const auto& x) { return x && *x == f; })) continue;
        if (std::find(allowed.begin(), allowed.end(), world_[i]) != allowed.end()) candidates.push_back(f);
      }
      if (can_add() && (candidates.empty() || rng_.chance(cfg_.p_fresh))) {
        slot_fact[s] = fresh(allowed[rng_.below(allowed.size())]);
      } else if (!candidates.empty()) {
        slot_fact[s] = rng_.pick(candidates);
      } else {
        return std::nullopt;
      }
    }

    Rule rule = make_rule(t, slot_fact, arity);
    for (const auto& p : protos_)
      if (p.rule == rule) return std::nullopt;
    if (eval_rule(rule, world_state(rule.facts())) != TruthValue::True) return std::nullopt;

    if (extra_slot && (t == RuleTemplate::OrAnte || t == RuleTemplate::AndCons) &&
        rng_.chance(cfg_.p_extra_support)) {
      const FactId f = *slot_fact[static_cast<std::size_t>(*extra_slot)];
      // not-yet-derived facts only, so the dependency graph stays acyclic
      if (derived_by_[f.index] == -1) supports.push_back({f, w(f)});
    }
    std::sort(supports.begin(), supports.end(), [&](const Literal& a, const Literal& b) {
      return *rule.slot_of(a.fact) < *rule.slot_of(b.fact);
    });
    return Proto{rule, std::move(supports), goal};
  }

  static Rule make_rule(RuleTemplate t, const std::array<std::optional<FactId>, 3>& f, int arity) {
    if (arity == 2) return Rule(t, *f[0], *f[1]);
    return Rule(t, *f[0], *f[1], *f[2]);
  }

  std::optional<CorrectChain> assemble(const Literal& goal) {
    // post-order walk from the goal's step
    std::vector<int> order;
    std::vector<bool> visited(protos_.size(), false);
    std::function<void(int)> visit = [&](int p) {
      visited[p] = true;
      std::vector<Literal> kids = protos_[p].supports;
      rng_.shuffle(kids);
      for (const auto& s : kids) {
        const int d = derived_by_[s.fact.index];
        if (d >= 0 && !visited[d]) visit(d);
      }
      order.push_back(p);
    };
    visit(derived_by_[goal.fact.index]);
    if (order.size() != protos_.size()) return std::nullopt;

    std::vector<std::uint32_t> perm(world_.size());
    for (std::uint32_t i = 0; i < perm.size(); ++i) perm[i] = i;
    rng_.shuffle(perm);
    auto relabel = [&](FactId f) { return FactId{perm[f.index]}; };
    auto relit = [&](const Literal& l) { return Literal{relabel(l.fact), l.value}; };
    auto rerule = [&](const Rule& r) {
      if (r.arity() == 2) return Rule(r.templ(), relabel(r.slot(Slot::A)), relabel(r.slot(Slot::B)));
      return Rule(r.templ(), relabel(r.slot(Slot::A)), relabel(r.slot(Slot::B)), relabel(r.slot(Slot::C)));
    };

    CorrectChain c;
    c.goal = relit(goal);
    std::set<FactId> base_seen;
    for (int p : order) {
      const Proto& pr = protos_[p];
      Step s{static_cast<int>(c.steps.size()) + 1, {}, rerule(pr.rule), relit(pr.conclusion)};
      for (const auto& l : pr.supports) {
        s.supports.push_back(relit(l));
        if (derived_by_[l.fact.index] == -1 && base_seen.insert(l.fact).second) c.base_facts.push_back(relit(l));
      }
      c.rules.push_back(s.rule);
      c.steps.push_back(std::move(s));
    }

    for (int d = 0; d < cfg_.distractor_rules; ++d) {
      if (auto r = distractor()) c.rules.push_back(rerule(*r));
    }
    rng_.shuffle(c.rules);

    if (!verify_chain(c).valid) return std::nullopt;
    if (cfg_.min_useful_steps > 1 && min_rules_for_goal(c, cfg_.min_useful_steps - 1) < cfg_.min_useful_steps)
      return std::nullopt;
    return c;
  }

  // A rule over existing facts that the hidden world satisfies, unused by any step.
  std::optional<Rule> distractor() {
    for (int tries = 0; tries < 20; ++tries) {
      const RuleTemplate t = kAllTemplates[rng_.categorical(weights_)];
      const int arity = slot_count(t);
      if (world_.size() < static_cast<std::size_t>(arity)) return std::nullopt;
      std::vector<std::uint32_t> ids(world_.size());
      for (std::uint32_t i = 0; i < ids.size(); ++i) ids[i] = i;
      rng_.shuffle(ids);
      std::array<std::optional<FactId>, 3> f;
      for (int s = 0; s < arity; ++s) f[s] = FactId{ids[s]};
      Rule r = make_rule(t, f, arity);
      if (eval_rule(r, world_state(r.facts())) != TruthValue::True) continue;
      if (std::any_of(protos_.begin(), protos_.end(), [&](const Proto& p) { return p.rule == r; })) continue;
      return r;
    }
    return std::nullopt;
  }

  const SynthesisConfig& cfg_;
  Rng& rng_;
  std::vector<double> weights_;
  std::vector<bool> world_;
  std::vector<int> derived_by_;  // proto index deriving each fact, or -1
  std::vector<Literal> open_;
  std::vector<Proto> protos_;
};

}  // namespace

CorrectChain synthesize_chain(const SynthesisConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  Builder b(cfg, rng);
  for (int a = 0; a < cfg.max_attempts; ++a)
    if (auto c = b.attempt()) return std::move(*c);
  throw SynthesisExhausted("synthesis exhausted after " + std::to_string(cfg.max_attempts) + " attempts");
}

}  // namespace cfps
