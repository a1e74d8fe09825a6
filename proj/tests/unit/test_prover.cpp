#include <gtest/gtest.h>

#include "cfps/chain.hpp"
#include "cfps/prover.hpp"
#include "cfps/rng.hpp"
#include "examples.hpp"

using namespace cfps;
using cfps::testing::example_a;
using cfps::testing::make_step;

namespace {

FactId F(std::uint32_t i) { return FactId{i}; }
Literal L(std::uint32_t i, bool v) { return {F(i), v}; }

Theory theory(std::initializer_list<const char*> rules, std::vector<FactId> extra = {}) {
  std::vector<Rule> rs;
  for (const char* r : rules) rs.push_back(parse_rule(r));
  return Theory::from(rs, extra);
}

State state_of(std::initializer_list<Literal> xs) {
  State s;
  for (const auto& l : xs) s.assign(l);
  return s;
}

// Truth-table oracle written against eval_rule only.
struct Naive {
  std::vector<State> models;
  Naive(const Theory& th, const State& s) {
    const auto n = th.universe.size();
    for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
      State a;
      for (std::size_t i = 0; i < n; ++i) a.assign({th.universe[i], ((bits >> i) & 1) != 0});
      bool ok = true;
      for (const auto& [f, v] : s.values()) ok = ok && a.holds({f, v});
      for (const auto& r : th.rules) ok = ok && eval_rule(r, a) == TruthValue::True;
      if (ok) models.push_back(a);
    }
  }
  EntailmentStatus status(const Literal& q) const {
    if (models.empty()) return EntailmentStatus::Inconsistent;
    for (const auto& m : models)
      if (!m.holds(q)) return EntailmentStatus::NotEntailed;
    return EntailmentStatus::Entailed;
  }
};

Theory random_theory(Rng& rng, std::uint32_t facts, int rules) {
  std::vector<Rule> rs;
  for (int i = 0; i < rules; ++i) {
    const RuleTemplate t = kAllTemplates[rng.below(kAllTemplates.size())];
    std::vector<std::uint32_t> ids(facts);
    for (std::uint32_t j = 0; j < facts; ++j) ids[j] = j;
    rng.shuffle(ids);
    if (slot_count(t) == 2) rs.emplace_back(t, F(ids[0]), F(ids[1]));
    else rs.emplace_back(t, F(ids[0]), F(ids[1]), F(ids[2]));
  }
  std::vector<FactId> all;
  for (std::uint32_t j = 0; j < facts; ++j) all.push_back(F(j));
  return Theory::from(rs, all);
}

State random_state(Rng& rng, std::uint32_t facts, int size) {
  State s;
  for (int i = 0; i < size; ++i) {
    const auto f = static_cast<std::uint32_t>(rng.below(facts));
    if (!s.known(F(f))) s.assign({F(f), rng.chance(0.5)});
  }
  return s;
}

}  // namespace

TEST(CountModels, Examples) {
  EXPECT_EQ(count_models(theory({"[F0] -> [F5]"}), {}), 3u);
  EXPECT_EQ(count_models(theory({"[F0] xor [F1]"}), state_of({L(0, true)})), 1u);
  EXPECT_EQ(count_models(theory({"[F0] -> [F1]"}), state_of({L(0, true), L(1, false)})), 0u);
}

TEST(CountModels, FreeFactsDoubling) {
  for (std::uint32_t n = 0; n <= 10; ++n) {
    std::vector<FactId> u;
    for (std::uint32_t i = 0; i < n; ++i) u.push_back(F(i));
    EXPECT_EQ(count_models(Theory::from({}, u), {}), 1ULL << n);
  }
}

TEST(CountModels, UniverseCap) {
  std::vector<FactId> u;
  for (std::uint32_t i = 0; i < 25; ++i) u.push_back(F(i));
  EXPECT_THROW(count_models(Theory::from({}, u), {}), UniverseTooLarge);
}

TEST(Entails, Examples) {
  EXPECT_EQ(entails(theory({"[F0] -> [F5]"}), state_of({L(5, false)}), L(0, false)).status, EntailmentStatus::Entailed);
  EXPECT_EQ(entails(theory({"[F7] -> ([F8] or [F5])"}), state_of({L(7, true), L(8, false)}), L(5, true)).status,
            EntailmentStatus::Entailed);
  auto r = entails(theory({"[F2] -> ([F6] and [F7])"}), state_of({L(6, false), L(7, true)}), L(2, true));
  ASSERT_EQ(r.status, EntailmentStatus::NotEntailed);
  ASSERT_TRUE(r.witness);
  EXPECT_EQ(r.witness->get(F(2)), TruthValue::False);
  EXPECT_EQ(entails(theory({"[F0] -> [F1]"}), state_of({L(0, true), L(1, false)}), L(0, true)).status,
            EntailmentStatus::Inconsistent);
}

TEST(Entails, WitnessIsCountermodel) {
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    Theory th = random_theory(rng, 8, 4);
    State s = random_state(rng, 8, 2);
    Literal q = L(static_cast<std::uint32_t>(rng.below(8)), rng.chance(0.5));
    auto r = entails(th, s, q);
    if (r.status != EntailmentStatus::NotEntailed) continue;
    ASSERT_TRUE(r.witness);
    EXPECT_FALSE(r.witness->holds(q));
    for (const auto& rule : th.rules) EXPECT_EQ(eval_rule(rule, *r.witness), TruthValue::True);
    for (const auto& [f, v] : s.values()) EXPECT_TRUE(r.witness->holds({f, v}));
  }
}

TEST(Entails, AgreesWithNaiveOracleAndIsMonotone) {
  Rng rng(17);
  for (int i = 0; i < 400; ++i) {
    const auto n = static_cast<std::uint32_t>(rng.between(3, 10));
    Theory th = random_theory(rng, n, static_cast<int>(rng.between(1, 6)));
    State s = random_state(rng, n, static_cast<int>(rng.between(0, 3)));
    Naive naive(th, s);
    Prover p(th);
    for (std::uint32_t f = 0; f < n; ++f)
      for (bool v : {false, true}) {
        const auto got = p.entails(s, L(f, v)).status;
        ASSERT_EQ(got, naive.status(L(f, v)));
        if (got != EntailmentStatus::Entailed) continue;
        State more = s;
        const Literal extra = L(static_cast<std::uint32_t>(rng.below(n)), rng.chance(0.5));
        if (more.known(extra.fact)) continue;
        more.assign(extra);
        EXPECT_NE(p.entails(more, L(f, v)).status, EntailmentStatus::NotEntailed);
      }
  }
}

TEST(Propagate, Examples) {
  State out = propagate(theory({"[F9] xor [F12]"}), state_of({L(12, false)}));
  EXPECT_EQ(out.get(F(9)), TruthValue::True);
  State s = state_of({L(0, true)});
  EXPECT_EQ(propagate(Theory{}, s), s);
  EXPECT_THROW(propagate(theory({"[F0] -> [F1]"}), state_of({L(0, true), L(1, false)})), PropagationContradiction);
}

TEST(Propagate, SoundAgainstEnumeration) {
  Rng rng(23);
  int checked = 0;
  for (int i = 0; i < 500; ++i) {
    const auto n = static_cast<std::uint32_t>(rng.between(3, 10));
    Theory th = random_theory(rng, n, static_cast<int>(rng.between(1, 7)));
    State s = random_state(rng, n, static_cast<int>(rng.between(1, 3)));
    Prover p(th);
    if (p.count_models(s) == 0) continue;
    State out;
    try {
      out = propagate(th, s);
    } catch (const PropagationContradiction&) {
      continue;  // only consistent states carry the soundness guarantee
    }
    for (const auto& lit : out.literals()) {
      ASSERT_EQ(p.entails(s, lit).status, EntailmentStatus::Entailed) << to_string(lit);
      ++checked;
    }
  }
  EXPECT_GT(checked, 500);
}

TEST(Patterns, CatalogSound) { EXPECT_TRUE(verify_pattern_catalog()); }

TEST(Patterns, ImplicationDirections) {
  const Rule r = parse_rule("[F0] -> [F5]");
  const auto pats = licensed_patterns(r);
  ASSERT_EQ(pats.size(), 2u);
  EXPECT_EQ(pats[0].premises, std::vector<Literal>{L(0, true)});
  EXPECT_EQ(pats[0].derived, L(5, true));
  EXPECT_EQ(pats[0].direction, Direction::Forward);
  EXPECT_EQ(pats[1].premises, std::vector<Literal>{L(5, false)});
  EXPECT_EQ(pats[1].derived, L(0, false));
  for (const auto& c : converse_patterns(r))
    for (const auto& p : pats) EXPECT_FALSE(c.premises == p.premises && c.derived == p.derived);
}

TEST(Patterns, XorBareBothDirections) {
  const Rule r = parse_rule("[F0] xor [F1]");
  const Literal sup[] = {L(0, false)};
  EXPECT_FALSE(matching_patterns(r, sup, L(1, true)).empty());
  EXPECT_TRUE(matching_patterns(r, sup, L(1, false)).empty());
  const Literal sup2[] = {L(1, true)};
  EXPECT_FALSE(matching_patterns(r, sup2, L(0, false)).empty());
}

TEST(Patterns, XorAntecedentBackward) {
  const Rule r = parse_rule("([F3] xor [F5]) -> [F6]");
  const Literal sup[] = {L(5, true), L(6, false)};
  EXPECT_FALSE(matching_patterns(r, sup, L(3, true)).empty());
}

TEST(StepSemantic, Examples) {
  const CorrectChain a = example_a();
  const Theory th = Theory::from(a.rules);
  State prefix = procedural_state(a.base_facts, std::span(a.steps).first(6));
  EXPECT_TRUE(check_step_semantic(th, prefix, a.steps[6]));

  // bridge fact [F5] never concluded, step still entailed
  State missing = procedural_state(a.base_facts, std::span(a.steps).first(3));
  const Step consumer = make_step(4, "([F3] xor [F5]) -> [F6]", {"[F6]=False"}, "[F3]=True");
  EXPECT_TRUE(check_step_semantic(th, missing, consumer));

  const Step contra = make_step(7, "([F0] and [F1]) -> [F2]", {"[F1]=True", "[F2]=False"}, "[F0]=True");
  EXPECT_FALSE(check_step_semantic(th, prefix, contra));

  State broken = prefix;
  broken.overwrite(L(9, false));
  EXPECT_THROW(check_step_semantic(th, broken, a.steps[6]), InconsistentPrefix);
}
