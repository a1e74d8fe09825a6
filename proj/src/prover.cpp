#include "cfps/prover.hpp"

#include <algorithm>
#include <bit>
#include <mutex>

namespace cfps {

std::string render_step(const Step& s) {
  std::string out = render_rule(s.rule) + " |";
  for (std::size_t i = 0; i < s.supports.size(); ++i) out += (i ? ", " : " ") + to_string(s.supports[i]);
  return out + " => " + to_string(s.conclusion);
}

Theory Theory::from(std::vector<Rule> rules, std::span<const FactId> extra) {
  Theory th;
  for (const auto& r : rules)
    for (FactId f : r.facts()) th.universe.push_back(f);
  th.universe.insert(th.universe.end(), extra.begin(), extra.end());
  std::sort(th.universe.begin(), th.universe.end());
  th.universe.erase(std::unique(th.universe.begin(), th.universe.end()), th.universe.end());
  th.rules = std::move(rules);
  return th;
}

namespace {

// Bit i of an assignment index is the value of variable i. For variables
// below 6 the column repeats inside every word.
constexpr std::uint64_t kLowColumns[6] = {
    0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL, 0xF0F0F0F0F0F0F0F0ULL,
    0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL,
};

std::size_t word_count(std::size_t vars) { return vars <= 6 ? 1 : (std::size_t{1} << (vars - 6)); }

std::uint64_t valid_mask(std::size_t vars) {
  return vars >= 6 ? ~0ULL : ((1ULL << (1u << vars)) - 1);
}

inline std::uint64_t column(std::size_t var, std::size_t word) {
  if (var < 6) return kLowColumns[var];
  return ((word >> (var - 6)) & 1) ? ~0ULL : 0ULL;
}

std::uint64_t rule_word(RuleTemplate t, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  switch (t) {
    case RuleTemplate::Impl: return ~a | b;
    case RuleTemplate::AndAnte: return ~(a & b) | c;
    case RuleTemplate::AndCons: return ~a | (b & c);
    case RuleTemplate::OrAnte: return ~(a | b) | c;
    case RuleTemplate::OrCons: return ~a | b | c;
    case RuleTemplate::XorAnte: return ~(a ^ b) | c;
    case RuleTemplate::XorBare: return a ^ b;
  }
  return ~0ULL;
}

}  // namespace

// --- ModelSet -----------------------------------------------------------------

std::uint64_t ModelSet::count() const {
  std::uint64_t n = 0;
  for (auto w : words_) n += static_cast<std::uint64_t>(std::popcount(w));
  return n;
}

bool ModelSet::empty() const {
  return std::all_of(words_.begin(), words_.end(), [](auto w) { return w == 0; });
}

void ModelSet::restrict(std::size_t var, bool value) {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const auto col = column(var, w);
    words_[w] &= value ? col : ~col;
  }
}

bool ModelSet::any_with(std::size_t var, bool value) const { return first_with(var, value).has_value(); }

std::optional<std::uint64_t> ModelSet::first_with(std::size_t var, bool value) const {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    const auto col = column(var, w);
    const auto hit = words_[w] & (value ? col : ~col);
    if (hit) return w * 64 + static_cast<std::uint64_t>(std::countr_zero(hit));
  }
  return std::nullopt;
}

// --- Prover ---------------------------------------------------------------------

Prover::Prover(Theory th, std::size_t cap) : th_(std::move(th)) {
  const std::size_t n = th_.universe.size();
  if (n > cap)
    throw UniverseTooLarge("universe too large: " + std::to_string(n) + " facts exceeds cap " + std::to_string(cap));
  const std::size_t words = word_count(n);
  rule_models_.assign(words, valid_mask(n));
  for (const auto& r : th_.rules) {
    const std::size_t a = var_of(r.slot(Slot::A)), b = var_of(r.slot(Slot::B));
    const std::size_t c = r.arity() == 3 ? var_of(r.slot(Slot::C)) : a;
    for (std::size_t w = 0; w < words; ++w)
      rule_models_[w] &= rule_word(r.templ(), column(a, w), column(b, w), column(c, w));
  }
}

bool Prover::covers(FactId f) const {
  return std::binary_search(th_.universe.begin(), th_.universe.end(), f);
}

std::size_t Prover::var_of(FactId f) const {
  const auto it = std::lower_bound(th_.universe.begin(), th_.universe.end(), f);
  if (it == th_.universe.end() || *it != f)
    throw std::invalid_argument(to_string(f) + " is outside the prover universe");
  return static_cast<std::size_t>(it - th_.universe.begin());
}

State Prover::assignment(std::uint64_t index) const {
  State s;
  for (std::size_t i = 0; i < th_.universe.size(); ++i) s.assign({th_.universe[i], ((index >> i) & 1) != 0});
  return s;
}

ModelSet Prover::models(const State& s) const {
  ModelSet m(th_.universe.size(), rule_models_);
  for (const auto& [f, v] : s.values()) m.restrict(var_of(f), v);
  return m;
}

EntailmentStatus Prover::entails_status(const ModelSet& m, const Literal& q) const {
  if (m.empty()) return EntailmentStatus::Inconsistent;
  return m.any_with(var_of(q.fact), !q.value) ? EntailmentStatus::NotEntailed : EntailmentStatus::Entailed;
}

EntailmentResult Prover::entails(const State& s, const Literal& q) const {
  const ModelSet m = models(s);
  EntailmentResult r;
  r.status = entails_status(m, q);
  if (r.status == EntailmentStatus::NotEntailed) r.witness = assignment(*m.first_with(var_of(q.fact), !q.value));
  return r;
}

bool Prover::check_step_semantic(const State& prefix, const Step& step) const {
  const ModelSet m = models(prefix);
  if (m.empty()) throw InconsistentPrefix("inconsistent prefix state before step " + std::to_string(step.index));
  for (const auto& lit : step.supports)
    if (entails_status(m, lit) != EntailmentStatus::Entailed) return false;
  return entails_status(m, step.conclusion) == EntailmentStatus::Entailed;
}

namespace {

Theory widen(const Theory& th, const State& s, std::span<const Literal> lits) {
  std::vector<FactId> extra(th.universe);
  for (const auto& [f, v] : s.values()) extra.push_back(f);
  for (const auto& l : lits) extra.push_back(l.fact);
  return Theory::from(th.rules, extra);
}

}  // namespace

std::uint64_t count_models(const Theory& th, const State& s, std::size_t cap) {
  return Prover(widen(th, s, {}), cap).count_models(s);
}

EntailmentResult entails(const Theory& th, const State& s, const Literal& q, std::size_t cap) {
  const Literal qs[1] = {q};
  return Prover(widen(th, s, qs), cap).entails(s, q);
}

bool check_step_semantic(const Theory& th, const State& prefix, const Step& step) {
  std::vector<Literal> lits(step.supports);
  lits.push_back(step.conclusion);
  for (FactId f : step.rule.facts()) lits.push_back({f, true});
  return Prover(widen(th, prefix, lits)).check_step_semantic(prefix, step);
}

// --- pattern catalog -----------------------------------------------------------

namespace {

using enum Slot;
constexpr bool T = true, F = false;

std::vector<InferencePattern> build_catalog(RuleTemplate t) {
  auto fwd = [t](std::vector<SlotValue> p, SlotValue d) { return InferencePattern{t, std::move(p), d, Direction::Forward}; };
  auto bwd = [t](std::vector<SlotValue> p, SlotValue d) { return InferencePattern{t, std::move(p), d, Direction::Backward}; };
  switch (t) {
    case RuleTemplate::Impl:
      return {fwd({{A, T}}, {B, T}), bwd({{B, F}}, {A, F})};
    case RuleTemplate::AndAnte:
      return {fwd({{A, T}, {B, T}}, {C, T}), bwd({{A, T}, {C, F}}, {B, F}), bwd({{B, T}, {C, F}}, {A, F})};
    case RuleTemplate::AndCons:
      return {fwd({{A, T}}, {B, T}), fwd({{A, T}}, {C, T}), bwd({{B, F}}, {A, F}), bwd({{C, F}}, {A, F})};
    case RuleTemplate::OrAnte:
      return {fwd({{A, T}}, {C, T}), fwd({{B, T}}, {C, T}), bwd({{C, F}}, {A, F}), bwd({{C, F}}, {B, F})};
    case RuleTemplate::OrCons:
      return {fwd({{A, T}, {B, F}}, {C, T}), fwd({{A, T}, {C, F}}, {B, T}), bwd({{B, F}, {C, F}}, {A, F})};
    case RuleTemplate::XorAnte:
      return {fwd({{A, T}, {B, F}}, {C, T}), fwd({{A, F}, {B, T}}, {C, T}),
              bwd({{A, T}, {C, F}}, {B, T}), bwd({{A, F}, {C, F}}, {B, F}),
              bwd({{B, T}, {C, F}}, {A, T}), bwd({{B, F}, {C, F}}, {A, F})};
    case RuleTemplate::XorBare:
      return {fwd({{A, T}}, {B, F}), fwd({{A, F}}, {B, T}), bwd({{B, T}}, {A, F}), bwd({{B, F}}, {A, T})};
  }
  return {};
}

BoundPattern bind_pattern(const Rule& r, const InferencePattern& p, std::size_t idx) {
  BoundPattern b{{}, {r.slot(p.derived.slot), p.derived.value}, p.direction, idx};
  for (const auto& sv : p.premises) b.premises.push_back({r.slot(sv.slot), sv.value});
  return b;
}

bool pattern_sound(const InferencePattern& p) {
  const int n = slot_count(p.templ);
  const Rule r = n == 2 ? Rule(p.templ, FactId{0}, FactId{1}) : Rule(p.templ, FactId{0}, FactId{1}, FactId{2});
  for (unsigned bits = 0; bits < (1u << n); ++bits) {
    State s;
    for (int i = 0; i < n; ++i) s.assign({FactId{static_cast<std::uint32_t>(i)}, ((bits >> i) & 1) != 0});
    if (eval_rule(r, s) != TruthValue::True) continue;
    const bool premises_hold = std::all_of(p.premises.begin(), p.premises.end(), [&](const SlotValue& sv) {
      return s.holds({r.slot(sv.slot), sv.value});
    });
    if (premises_hold && !s.holds({r.slot(p.derived.slot), p.derived.value})) return false;
  }
  return true;
}

}  // namespace

const std::vector<InferencePattern>& pattern_catalog(RuleTemplate t) {
  static const auto catalogs = [] {
    std::vector<std::vector<InferencePattern>> all;
    for (RuleTemplate tt : kAllTemplates) all.push_back(build_catalog(tt));
    for (const auto& cat : all)
      for (const auto& p : cat)
        if (!pattern_sound(p)) throw std::logic_error("unsound inference pattern in catalog");
    return all;
  }();
  return catalogs[static_cast<std::size_t>(t)];
}

bool verify_pattern_catalog() {
  for (RuleTemplate t : kAllTemplates)
    for (const auto& p : build_catalog(t))
      if (!pattern_sound(p)) return false;
  return true;
}

std::vector<BoundPattern> licensed_patterns(const Rule& r) {
  const auto& cat = pattern_catalog(r.templ());
  std::vector<BoundPattern> out;
  out.reserve(cat.size());
  for (std::size_t i = 0; i < cat.size(); ++i) out.push_back(bind_pattern(r, cat[i], i));
  return out;
}

std::vector<BoundPattern> converse_patterns(const Rule& r) {
  if (r.templ() != RuleTemplate::Impl) return {};
  const FactId a = r.slot(Slot::A), b = r.slot(Slot::B);
  return {BoundPattern{{{b, true}}, {a, true}, Direction::Backward, 0},
          BoundPattern{{{a, false}}, {b, false}, Direction::Forward, 1}};
}

std::vector<BoundPattern> matching_patterns(const Rule& rule, std::span<const Literal> supports,
                                            const Literal& conclusion) {
  std::vector<BoundPattern> out;
  for (auto& p : licensed_patterns(rule)) {
    if (p.derived != conclusion) continue;
    const bool covered = std::all_of(p.premises.begin(), p.premises.end(), [&](const Literal& l) {
      return std::find(supports.begin(), supports.end(), l) != supports.end();
    });
    if (covered) out.push_back(std::move(p));
  }
  return out;
}

State propagate(const Theory& th, const State& s) {
  State cur = s;
  std::vector<std::vector<BoundPattern>> bound;
  bound.reserve(th.rules.size());
  for (const auto& r : th.rules) bound.push_back(licensed_patterns(r));
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& pats : bound) {
      for (const auto& p : pats) {
        const bool fires = std::all_of(p.premises.begin(), p.premises.end(), [&](const Literal& l) { return cur.holds(l); });
        if (!fires) continue;
        const TruthValue v = cur.get(p.derived.fact);
        if (v == TruthValue::Unknown) {
          cur.assign(p.derived);
          changed = true;
        } else if (v != truth(p.derived.value)) {
          throw PropagationContradiction("contradiction during propagation: derived " + to_string(p.derived));
        }
      }
    }
  }
  return cur;
}

}  // namespace cfps
