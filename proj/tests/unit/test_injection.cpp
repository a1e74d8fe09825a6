#include <gtest/gtest.h>

#include <algorithm>
#include <iostream>

#include "cfps/injection.hpp"
#include "cfps/rng.hpp"
#include "examples.hpp"

using namespace cfps;
using cfps::testing::example_a;
using cfps::testing::example_b;
using cfps::testing::make_step;

namespace {

bool contains(const std::vector<ErrorType>& v, ErrorType e) { return std::find(v.begin(), v.end(), e) != v.end(); }

Instance make_instance(const CorrectChain& c, int k, ErrorType e, std::uint64_t seed = 0) {
  Instance inst;
  inst.correct = c;
  inst.erroneous = inject(c, k, e, seed);
  return inst;
}

}  // namespace

TEST(ErrorTypes, NamesAndGroups) {
  for (ErrorType e : kAllErrorTypes) EXPECT_EQ(error_type_from_string(to_string(e)), e);
  EXPECT_EQ(group_of(ErrorType::ConverseError), ErrorGroup::Structural);
  EXPECT_EQ(group_of(ErrorType::CircularReference), ErrorGroup::Structural);
  EXPECT_EQ(group_of(ErrorType::XorAsEquiv), ErrorGroup::TruthState);
  double total = 0;
  for (const auto& [e, w] : default_error_weights()) total += w;
  EXPECT_EQ(total, 20000.0);
  EXPECT_EQ(default_error_weights().size(), 11u);
}

TEST(Applicable, XorStep) {
  // known side False: equivalence reading flips the answer
  const CorrectChain b = example_b();
  const auto app = applicable_errors(b, 7);
  EXPECT_TRUE(contains(app, ErrorType::XorAsEquiv));
  EXPECT_FALSE(contains(app, ErrorType::XorAsOr));
  EXPECT_FALSE(contains(app, ErrorType::ImplicationMisuse));
}

TEST(Applicable, ImplicationStep) {
  CorrectChain c;
  c.base_facts = cfps::testing::literals({"[F5]=False", "[F1]=True"});
  c.steps = {make_step(1, "[F1] -> [F2]", {"[F1]=True"}, "[F2]=True"),
             make_step(2, "[F0] -> [F5]", {"[F5]=False"}, "[F0]=False")};
  for (const auto& s : c.steps) c.rules.push_back(s.rule);
  c.goal = parse_literal("[F0]=False");
  const auto app = applicable_errors(c, 2);
  EXPECT_TRUE(contains(app, ErrorType::ImplicationMisuse));
  EXPECT_TRUE(contains(app, ErrorType::ConverseError));
  EXPECT_FALSE(contains(app, ErrorType::OrAndConfusion));
}

TEST(Applicable, FirstStepHasNoPrerequisite) {
  const auto app = applicable_errors(example_a(), 1);
  EXPECT_FALSE(contains(app, ErrorType::MissingPrerequisite));
  EXPECT_FALSE(contains(app, ErrorType::RedundantStep));
}

TEST(Inject, MissingPrerequisiteMatchesWorkedExample) {
  const Instance inst = make_instance(example_a(), 4, ErrorType::MissingPrerequisite);
  const auto& s = inst.erroneous.steps;
  ASSERT_EQ(s.size(), 6u);
  EXPECT_EQ(inst.erroneous.k, 4);
  EXPECT_EQ(s[3], make_step(4, "([F3] xor [F5]) -> [F6]", {"[F6]=False"}, "[F3]=True"));
  EXPECT_EQ(s[4], make_step(5, "([F3] or [F4]) -> [F1]", {"[F3]=True", "[F4]=False"}, "[F1]=True"));
  EXPECT_EQ(s[5], make_step(6, "([F0] and [F1]) -> [F2]", {"[F1]=True", "[F2]=False"}, "[F0]=False"));
  const auto r = verify_first_error(inst);
  EXPECT_TRUE(r.valid) << (r.failures.empty() ? "" : r.failures.front());
}

TEST(Inject, XorAsEquivAtLastStep) {
  const Instance inst = make_instance(example_b(), 7, ErrorType::XorAsEquiv);
  ASSERT_EQ(inst.erroneous.steps.size(), 7u);
  EXPECT_EQ(inst.erroneous.steps.back().conclusion, parse_literal("[F1]=False"));
  const auto r = verify_first_error(inst);
  EXPECT_TRUE(r.valid) << (r.failures.empty() ? "" : r.failures.front());
}

TEST(Inject, DropConditionCanonicalOutput) {
  CorrectChain c;
  c.base_facts = cfps::testing::literals({"[F6]=False", "[F7]=True", "[F0]=True"});
  c.steps = {make_step(1, "[F2] -> ([F6] and [F7])", {"[F6]=False", "[F7]=True"}, "[F2]=False"),
             make_step(2, "([F2] or [F0]) -> [F9]", {"[F0]=True", "[F2]=False"}, "[F9]=True")};
  for (const auto& s : c.steps) c.rules.push_back(s.rule);
  c.goal = parse_literal("[F9]=True");
  ASSERT_TRUE(verify_chain(c).valid);
  const auto e = inject(c, 1, ErrorType::DropCondition, 0);
  EXPECT_EQ(e.steps[0].conclusion, parse_literal("[F2]=True"));
  // [F2] flipped to True still lets the disjunction fire forward
  EXPECT_EQ(e.steps[1].conclusion, parse_literal("[F9]=True"));
}

TEST(Inject, NotApplicableIsInfeasible) {
  EXPECT_THROW(inject(example_a(), 1, ErrorType::MissingPrerequisite, 0), InjectionInfeasible);
}

TEST(Recompute, EmptyAfterLastStep) {
  const CorrectChain b = example_b();
  std::vector<Step> prefix = b.steps;
  prefix.back().conclusion = prefix.back().conclusion.negated();
  EXPECT_TRUE(recompute_downstream(b, prefix).steps.empty());
}

TEST(Recompute, FlipMidChainOnDisjunction) {
  // ([F3] or [F4]) -> [F1] with [F4]=False: after [F3] flips to False the
  // forward pattern cannot fire and no other pattern targets [F1]
  const CorrectChain a = example_a();
  std::vector<Step> prefix(a.steps.begin(), a.steps.begin() + 5);
  prefix[4].conclusion = prefix[4].conclusion.negated();
  EXPECT_THROW(recompute_downstream(a, prefix), DownstreamStuck);
  const auto dropped = recompute_downstream(a, prefix, 6, true);
  EXPECT_EQ(dropped.dropped, (std::vector<int>{6, 7}));

  // with the unflipped prefix the same step recomputes unchanged
  std::vector<Step> clean(a.steps.begin(), a.steps.begin() + 5);
  const auto same = recompute_downstream(a, clean);
  ASSERT_EQ(same.steps.size(), 2u);
  EXPECT_EQ(same.steps[0], a.steps[5]);
}

TEST(VerifyFirstError, StillDerivableRejected) {
  // a "corruption" that equals the correct conclusion is derivable and must fail
  Instance inst;
  inst.correct = example_b();
  inst.erroneous.steps = inst.correct.steps;
  inst.erroneous.k = 7;
  inst.erroneous.error_type = ErrorType::XorAsEquiv;
  const auto r = verify_first_error(inst);
  EXPECT_FALSE(r.valid);
  EXPECT_TRUE(r.still_derivable);
}

TEST(SampleErrorType, SingleApplicable) {
  const ErrorType only[] = {ErrorType::RedundantStep};
  for (std::uint64_t s = 0; s < 50; ++s)
    EXPECT_EQ(sample_error_type(default_error_weights(), only, s), ErrorType::RedundantStep);
  EXPECT_THROW(sample_error_type(default_error_weights(), std::span<const ErrorType>{}, 1), std::invalid_argument);
}

TEST(SampleErrorType, PublishedShares) {
  std::map<ErrorType, int> hits;
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hits[sample_error_type(default_error_weights(), kAllErrorTypes, derive_seed(5, i))];
  EXPECT_NEAR(hits[ErrorType::XorAsEquiv] / double(n), 0.1805, 0.005);
}

TEST(SampleErrorType, UniformChiSquare) {
  std::map<ErrorType, double> w;
  for (ErrorType e : kAllErrorTypes) w[e] = 1.0;
  std::map<ErrorType, int> hits;
  const int n = 110000;
  for (int i = 0; i < n; ++i) ++hits[sample_error_type(w, kAllErrorTypes, derive_seed(8, i))];
  double chi = 0;
  for (ErrorType e : kAllErrorTypes) {
    const double d = hits[e] - n / 11.0;
    chi += d * d / (n / 11.0);
  }
  EXPECT_LT(chi, 29.59);  // 10 dof, p = 0.001
}

TEST(BuildCounterfactual, EveryTypeReachable) {
  SynthesisConfig scfg;
  CounterfactualConfig cfg;
  for (ErrorType e : kAllErrorTypes) {
    int accepted = 0;
    RejectionStats stats;
    for (std::uint64_t i = 0; i < 60 && accepted < 5; ++i) {
      const auto c = synthesize_chain(scfg, derive_seed(1000 + static_cast<int>(e), i));
      auto res = build_counterfactual(c, cfg, derive_seed(2000, i), e);
      stats.merge(res.stats);
      if (!res.instance) continue;
      ++accepted;
      EXPECT_EQ(res.instance->error_type(), e);
      const auto r = verify_first_error(*res.instance);
      EXPECT_TRUE(r.valid) << to_string(e) << ": " << (r.failures.empty() ? "" : r.failures.front());
    }
    EXPECT_GT(accepted, 0) << to_string(e);
    std::cout << to_string(e) << " chains=" << stats.attempts << " accepted=" << stats.accepted;
    for (const auto& [why, n] : stats.rejected) std::cout << " " << to_string(why) << "=" << n;
    std::cout << "\n";
  }
}

TEST(BuildCounterfactual, DeterministicAndAccounted) {
  const auto c = synthesize_chain(SynthesisConfig{}, 77);
  CounterfactualConfig cfg;
  auto a = build_counterfactual(c, cfg, 5);
  auto b = build_counterfactual(c, cfg, 5);
  EXPECT_EQ(a.instance, b.instance);
  EXPECT_EQ(a.stats.attempts, a.stats.accepted + a.stats.total_rejected());
}
