#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cfps/eval.hpp"
#include "cfps/rng.hpp"
#include "corpus.hpp"
#include "examples.hpp"

using namespace cfps;
using cfps::testing::instance_a;
using cfps::testing::instance_b;

namespace {

Candidate cand(std::vector<double> s, std::string a = "", bool ok = false) { return {std::move(s), std::move(a), ok}; }

struct Scripted : TranslatorClient {
  std::vector<std::string> replies;
  std::size_t calls = 0;
  std::string send(const PromptBundle&) override { return replies[calls++ % replies.size()]; }
};

}  // namespace

TEST(Oracle, ExampleAFirstErrorAtStepFour) {
  const auto judge = oracle_judge();
  const Instance a = instance_a();
  const auto err = score_chain(*judge, a, ChainKind::Erroneous);
  EXPECT_EQ(err, (std::vector<double>{1, 1, 1, 0, 0, 0}));
  const auto ok = score_chain(*judge, a, ChainKind::Correct);
  EXPECT_EQ(ok, std::vector<double>(7, 1.0));
  EXPECT_EQ(score_chain(*judge, instance_b(), ChainKind::Erroneous).back(), 0.0);
}

TEST(Oracle, ClosedLoopOnCorpus) {
  const auto& c = cfps::testing::shared_corpus();
  const auto judge = oracle_judge();
  EvalOptions opt;
  opt.erroneous_only = false;
  const EvalReport r = evaluate(c.instances, *judge, opt);
  EXPECT_EQ(r.first_error_acc, 1.0);
  EXPECT_EQ(r.all_step_acc, 1.0);
  EXPECT_EQ(r.all_step_acc_macro, 1.0);
  EXPECT_EQ(r.n_trajectories, 2000u);
  std::uint64_t sum = 0;
  for (const auto& [e, b] : r.per_type) sum += b.n;
  EXPECT_EQ(sum, r.n_instances);
}

TEST(Metrics, FirstErrorExactMatch) {
  EXPECT_EQ(first_error_accuracy(std::vector<int>{4, 5, 0}, std::vector<int>{4, 4, 0}), 2.0 / 3.0);
  EXPECT_THROW(first_error_accuracy(std::vector<int>{1}, std::vector<int>{1, 2}), std::invalid_argument);
  EXPECT_EQ(predicted_first_error(std::vector<double>{0.9, 0.5, 0.49, 0.1}, 0.5), 3);
  EXPECT_EQ(predicted_first_error(std::vector<double>{0.9, 0.5}, 0.5), 0);
}

TEST(Metrics, ConstantOneNeverFlags) {
  const std::vector<Instance> insts = {instance_a(), instance_b()};
  const auto judge = constant_judge(1.0);
  const EvalReport r = evaluate(insts, *judge);
  EXPECT_EQ(r.first_error_acc, 0.0);
  EXPECT_EQ(r.n_trajectories, 2u);
  // A: 3 of 6 steps right, B: 6 of 7
  EXPECT_DOUBLE_EQ(r.all_step_acc, 9.0 / 13.0);
  EXPECT_DOUBLE_EQ(r.all_step_acc_macro, (3.0 / 6.0 + 6.0 / 7.0) / 2.0);
}

TEST(Metrics, AllStepArithmetic) {
  const std::vector<std::vector<bool>> gold = {{true, true, true, false, false, false}};
  const std::vector<std::vector<bool>> pred = {{true, true, true, false, false, true}};
  EXPECT_DOUBLE_EQ(all_step_accuracy(pred, gold), 5.0 / 6.0);
  EXPECT_THROW(all_step_accuracy({{true}}, gold), std::invalid_argument);
}

TEST(Metrics, CoinFlipJudgeNearHalf) {
  const auto& c = cfps::testing::shared_corpus();
  const auto judge = random_judge(99);
  EvalOptions opt;
  opt.erroneous_only = false;
  const EvalReport r = evaluate(c.instances, *judge, opt);
  const double n = static_cast<double>(r.n_steps);
  EXPECT_NEAR(r.all_step_acc, 0.5, 4.0 * std::sqrt(0.25 / n));
  // localization needs a clean prefix
  EXPECT_LE(r.first_error_acc, r.clean_prefix_rate);
}

TEST(Metrics, WorkersDoNotChangeReport) {
  const auto& c = cfps::testing::shared_corpus();
  std::vector<Instance> some(c.instances.begin(), c.instances.begin() + 200);
  const auto judge = random_judge(3);
  EvalOptions one, four;
  four.workers = 4;
  EXPECT_EQ(evaluate(some, *judge, one).to_json(), evaluate(some, *judge, four).to_json());
}

TEST(Judges, SpecParsing) {
  EXPECT_EQ(make_judge("oracle")->name(), "oracle");
  EXPECT_EQ(make_judge("random:5")->name(), "random:5");
  EXPECT_THROW(make_judge("constant:1.5"), std::invalid_argument);
  EXPECT_THROW(make_judge("constant:"), std::invalid_argument);
  EXPECT_THROW(make_judge("psychic"), std::invalid_argument);
}

TEST(Judges, ScoreFile) {
  const std::string path = ::testing::TempDir() + "/scores.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"example-a","chain":"erroneous","scores":[0.9,0.8,0.7,0.2,0.1,0.3]})" << "\n";
    out << R"({"id":"example-a","chain":"correct","scores":[0.9,0.9,0.9,0.9,0.9,0.9,0.4]})" << "\n";
  }
  const auto judge = make_judge("scores:" + path);
  EvalOptions opt;
  opt.erroneous_only = false;
  const EvalReport r = evaluate({instance_a()}, *judge, opt);
  EXPECT_EQ(r.per_type.at(ErrorType::MissingPrerequisite).first_error_acc, 1.0);
  ASSERT_TRUE(r.correct);
  EXPECT_EQ(r.correct->first_error_acc, 0.0);
  EXPECT_THROW(evaluate({instance_b()}, *judge), std::out_of_range);
}

TEST(Judges, LabelWords) {
  Scripted client;
  client.replies = {"True", "true.", "TRUE", "false", "False", "false"};
  LabelWordJudge judge(client);
  EXPECT_EQ(score_chain(judge, instance_a(), ChainKind::Erroneous), (std::vector<double>{1, 1, 1, 0, 0, 0}));
  client.replies = {"maybe"};
  EXPECT_THROW(score_chain(judge, instance_a(), ChainKind::Erroneous), TranslationError);
}

TEST(BestOfK, Examples) {
  EXPECT_EQ(bestofk_select({cand({0.9, 0.2}), cand({0.6, 0.5})}), 1u);
  EXPECT_EQ(bestofk_select({cand({0.3})}), 0u);
  EXPECT_EQ(bestofk_select({cand({0.4}), cand({0.4})}), 0u);
  EXPECT_THROW(bestofk_select({}), std::invalid_argument);
  EXPECT_EQ(majority_at_k({cand({}, "A"), cand({}, "B"), cand({}, "A")}), "A");
  EXPECT_EQ(majority_at_k({cand({}, "B"), cand({}, "A"), cand({}, "A"), cand({}, "B")}), "B");
  EXPECT_EQ(oracle_at_k({cand({}, "", false), cand({}, "", false), cand({}, "", true), cand({}, "", false)}), 1);
  EXPECT_EQ(oracle_at_k({cand({}, "", false)}), 0);
  EXPECT_THROW(majority_at_k({}), std::invalid_argument);
  EXPECT_THROW(oracle_at_k({}), std::invalid_argument);
}

TEST(BestOfK, FixturePoolsMatchHandComputed) {
  const auto pools = read_pools(std::string(CFPS_FIXTURE_DIR) + "/pools.jsonl");
  std::ifstream exp(std::string(CFPS_FIXTURE_DIR) + "/pools_expected.txt");
  std::string line;
  std::size_t i = 0;
  while (std::getline(exp, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string id, answer;
    std::size_t sel;
    int orc;
    ls >> id >> sel >> answer >> orc;
    ASSERT_LT(i, pools.size());
    EXPECT_EQ(pools[i].id, id);
    EXPECT_EQ(bestofk_select(pools[i].candidates), sel) << id;
    EXPECT_EQ(majority_at_k(pools[i].candidates), answer) << id;
    EXPECT_EQ(oracle_at_k(pools[i].candidates), orc) << id;
    ++i;
  }
  EXPECT_EQ(i, pools.size());
  const SelectionReport r = evaluate_pools(pools);
  EXPECT_DOUBLE_EQ(r.bestofk_acc, 0.4);
  EXPECT_DOUBLE_EQ(r.majority_acc, 0.2);
  EXPECT_DOUBLE_EQ(r.oracle_acc, 0.8);
}

TEST(BestOfK, RejectsOutOfRangeScores) {
  const std::string path = ::testing::TempDir() + "/bad_pool.jsonl";
  std::ofstream(path) << R"({"id":"q","candidates":[{"scores":[1.5],"answer":"a","correct":true}]})" << "\n";
  EXPECT_THROW(read_pools(path), std::invalid_argument);
}
