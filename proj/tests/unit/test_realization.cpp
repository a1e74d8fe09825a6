#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "cfps/realization.hpp"
#include "corpus.hpp"
#include "examples.hpp"
#include "json.hpp"

using namespace cfps;
using cfps::testing::instance_a;
using cfps::testing::instance_b;
using cfps::testing::map_a;
using cfps::testing::map_b;

namespace {

struct Scripted : TranslatorClient {
  std::vector<std::string> replies;
  std::vector<PromptBundle> seen;
  std::string send(const PromptBundle& p) override {
    seen.push_back(p);
    const std::string r = replies.at(std::min(seen.size(), replies.size()) - 1);
    return r;
  }
};

std::string mapping_json(const PredicateMap& m) {
  nlohmann::ordered_json j;
  for (const auto& [f, e] : m) j[to_string(f)] = {{"predicate", e.predicate}, {"true", e.positive}, {"false", e.negative}};
  return j.dump();
}

std::size_t occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Lexicon, SizesAndCleanliness) {
  const auto& lex = predicate_lexicon();
  EXPECT_GE(lex.size(), 40u);
  std::set<std::string> names;
  std::vector<std::string> sentences;
  for (const auto& f : lex) {
    EXPECT_TRUE(names.insert(f.predicate).second) << f.predicate;
    sentences.push_back(f.positive);
    sentences.push_back(f.negative);
  }
  // no sentence may contain another, or alignment audits become ambiguous
  for (std::size_t i = 0; i < sentences.size(); ++i)
    for (std::size_t j = 0; j < sentences.size(); ++j)
      if (i != j) EXPECT_EQ(sentences[i].find(sentences[j]), std::string::npos) << sentences[i] << " / " << sentences[j];
  for (const auto& s : sentences) EXPECT_TRUE(lint_text(s, 1).empty()) << s;
  for (RuleTemplate t : kAllTemplates) {
    EXPECT_GE(rule_frames(t).size(), 4u);
    for (const auto& f : rule_frames(t)) EXPECT_TRUE(lint_text(f, 1).empty()) << f;
  }
}

TEST(Context, Deterministic) {
  EXPECT_EQ(make_context(5), make_context(5));
  const auto c = make_context(5);
  EXPECT_FALSE(c.name.empty());
  EXPECT_NE(c.background.find(c.name), std::string::npos);
}

TEST(PredicateMap, TemplatedDeterministicAndValid) {
  Instance inst = instance_a();
  const auto m1 = build_predicate_map(inst, 42);
  const auto m2 = build_predicate_map(inst, 42);
  EXPECT_EQ(m1, m2);
  EXPECT_NO_THROW(validate_predicate_map(m1, instance_facts(inst)));
  EXPECT_EQ(m1.size(), 13u);
  EXPECT_NE(m1.begin()->second.positive.find("Oskar"), std::string::npos);
}

TEST(PredicateMap, ExternalReplayFixtureAccepted) {
  auto replay = ReplayTranslator::from_file(std::string(CFPS_FIXTURE_DIR) + "/mapping_a_transcript.jsonl");
  const PredicateMap m = build_predicate_map(instance_a(), *replay);
  EXPECT_EQ(m, map_a());
  EXPECT_EQ(sentence(m, parse_literal("[F12]=False")), "Oskar does not consider adding a coffee cart");
  EXPECT_EQ(replay->remaining(), 0u);
}

TEST(PredicateMap, ExternalMissingSymbolRejected) {
  PredicateMap partial = map_a();
  partial.erase(FactId{5});
  Scripted client;
  client.replies = {mapping_json(partial)};
  try {
    build_predicate_map(instance_a(), client, 2);
    FAIL() << "expected TranslationError";
  } catch (const TranslationError& e) {
    EXPECT_NE(std::string(e.what()).find("[F5]"), std::string::npos);
  }
  EXPECT_EQ(client.seen.size(), 3u);  // one try plus two retries
}

TEST(PredicateMap, ExternalDuplicateRejectedThenRetried) {
  PredicateMap dup = map_a();
  dup[FactId{3}].predicate = dup[FactId{4}].predicate;
  Scripted client;
  client.replies = {"Here you go: " + mapping_json(dup), mapping_json(map_a())};
  EXPECT_EQ(build_predicate_map(instance_a(), client, 2), map_a());
  EXPECT_EQ(client.seen.size(), 2u);
}

TEST(PredicateMap, ExternalForbiddenWordRejected) {
  PredicateMap m = map_a();
  m[FactId{2}].positive = "Oskar hires the wrong helper";
  Scripted client;
  client.replies = {mapping_json(m)};
  EXPECT_THROW(build_predicate_map(instance_a(), client, 0), TranslationError);
}

TEST(Realize, ExampleBFinalStepDiffersOnlyInConclusion) {
  const NlRecord nl = realize_instance(instance_b(), map_b(), NlMode::Clean);
  ASSERT_EQ(nl.correct_steps.size(), 7u);
  ASSERT_EQ(nl.erroneous_steps.size(), 7u);
  const std::string& ok = nl.correct_steps[6];
  const std::string& bad = nl.erroneous_steps[6];
  EXPECT_NE(ok.find("Tamsin learned to read tide tables"), std::string::npos);
  EXPECT_NE(bad.find("Tamsin did not learn to read tide tables"), std::string::npos);
  // swapping the conclusion sentence turns one text into the other
  std::string swapped = ok;
  swapped.replace(ok.find("Tamsin learned to read tide tables"), std::string("Tamsin learned to read tide tables").size(),
                  "Tamsin did not learn to read tide tables");
  EXPECT_EQ(swapped, bad);
  EXPECT_EQ(nl.goal, "Show that Tamsin learned to read tide tables.");
}

TEST(Realize, SharedPrefixIdentical) {
  for (const Instance& inst : {instance_a(), instance_b()}) {
    const auto map = build_predicate_map(inst, 1);
    const NlRecord nl = realize_instance(inst, map, NlMode::Clean, 3);
    for (int t = 1; t < inst.k(); ++t) EXPECT_EQ(nl.correct_steps[t - 1], nl.erroneous_steps[t - 1]) << inst.id << " " << t;
  }
}

TEST(Realize, AlignmentAuditOnCorpus) {
  // each literal occurrence in a step shows up as exactly one copy of its sentence
  const auto& corpus = cfps::testing::shared_corpus();
  for (std::size_t i = 0; i < 200; ++i) {
    const Instance& inst = corpus.instances[i];
    const PredicateMap map = build_predicate_map(inst, inst.seed);
    const NlRecord nl = realize_instance(inst, map, NlMode::Clean, inst.seed);
    auto audit = [&](const std::vector<Step>& steps, const std::vector<std::string>& texts) {
      ASSERT_EQ(steps.size(), texts.size());
      for (std::size_t t = 0; t < steps.size(); ++t) {
        std::map<std::string, std::size_t> want;
        for (const auto& l : steps[t].supports) ++want[sentence(map, l)];
        ++want[sentence(map, steps[t].conclusion)];
        for (const auto& [f, e] : map) {
          for (const std::string* s : {&e.positive, &e.negative}) {
            const auto it = want.find(*s);
            EXPECT_EQ(occurrences(texts[t], *s), it == want.end() ? 0u : it->second) << inst.id << " step " << t + 1;
          }
        }
      }
    };
    audit(inst.correct.steps, nl.correct_steps);
    audit(inst.erroneous.steps, nl.erroneous_steps);
    for (std::size_t b = 0; b < inst.correct.base_facts.size(); ++b)
      EXPECT_EQ(nl.base_facts[b], sentence(map, inst.correct.base_facts[b]) + ".");
    for (int t = 1; t < inst.k(); ++t) EXPECT_EQ(nl.correct_steps[t - 1], nl.erroneous_steps[t - 1]);
  }
}

TEST(Realize, AnnotatedAddsSymbolicTags) {
  const NlRecord nl = realize_instance(instance_a(), map_a(), NlMode::Annotated);
  EXPECT_EQ(nl.mode, "annotated");
  EXPECT_NE(nl.erroneous_steps[3].find("[first deviation: missing_prerequisite]"), std::string::npos);
  EXPECT_NE(nl.correct_steps[0].find("[F9]=True"), std::string::npos);
}

TEST(Lint, ForbiddenWordAtK) {
  NlRecord nl;
  nl.erroneous_steps = {"Oskar sells the old tandem, which is clearly wrong.", "fine", "Nothing odd here."};
  auto v = leak_lint(nl, 1);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].term, "wrong");
  EXPECT_EQ(v[0].step, 1);
  // before k nothing is reported
  EXPECT_TRUE(leak_lint(nl, 2).empty());
}

TEST(Lint, WordBoundariesAndCase) {
  EXPECT_TRUE(lint_text("Oskar was wrongfooted by the weather", 1).empty());
  EXPECT_TRUE(lint_text("Terrorists", 1).empty());
  EXPECT_EQ(lint_text("ERROR in the ledger", 1).size(), 1u);
  EXPECT_EQ(lint_text("This Step follows", 1).size(), 1u);
  EXPECT_EQ(lint_text("according to  the rule, and the conclusion holds", 1).size(), 2u);
}

TEST(Lint, CleanExamplesHaveNoViolations) {
  EXPECT_TRUE(leak_lint(realize_instance(instance_a(), map_a(), NlMode::Clean), 4).empty());
  EXPECT_TRUE(leak_lint(realize_instance(instance_b(), map_b(), NlMode::Clean), 7).empty());
}

TEST(Translator, RecordingReplaysIdentically) {
  Scripted inner;
  inner.replies = {"A short background.", mapping_json(map_b())};
  RecordingTranslator rec(inner);
  const ContextProfile ctx = instance_b().context;
  const std::string bg = rec.send(background_prompt(ctx.name));
  const PredicateMap m = build_predicate_map(instance_b(), rec);
  std::stringstream transcript;
  rec.write(transcript);

  ReplayTranslator replay(transcript);
  EXPECT_EQ(replay.send(background_prompt(ctx.name)), bg);
  EXPECT_EQ(build_predicate_map(instance_b(), replay), m);
  EXPECT_THROW(replay.send(background_prompt(ctx.name)), TranslationError);
}

TEST(Translator, ReplayDetectsPromptDrift) {
  Scripted inner;
  inner.replies = {"x"};
  RecordingTranslator rec(inner);
  rec.send(background_prompt("Mara"));
  std::stringstream transcript;
  rec.write(transcript);
  ReplayTranslator replay(transcript);
  EXPECT_THROW(replay.send(background_prompt("Hana")), TranslationError);
}

TEST(Translator, HttpNeedsEndpoint) {
  HttpTranslatorConfig cfg;
  cfg.endpoint = "not-a-url";
  HttpTranslator t(cfg);
  EXPECT_THROW(t.send(background_prompt("Mara")), TranslationError);
}

TEST(Prompts, RoleTaggedSections) {
  const auto p = predicate_map_prompt(instance_a().context, instance_facts(instance_a()));
  ASSERT_EQ(p.messages.size(), 2u);
  EXPECT_EQ(p.messages[0].role, "system");
  EXPECT_EQ(p.messages[1].role, "user");
  EXPECT_NE(p.messages[1].content.find("[F12]"), std::string::npos);
  const auto j = judge_prompt("Show that x.", {"a."}, {}, "Since a, b.");
  EXPECT_EQ(j.purpose, "judge");
  for (const char* section : {"Goal:", "Known facts:", "Earlier steps:", "Step to check:"})
    EXPECT_NE(j.messages[1].content.find(section), std::string::npos) << section;
  EXPECT_NE(bundle_digest(j), bundle_digest(judge_prompt("Show that y.", {"a."}, {}, "Since a, b.")));
}
