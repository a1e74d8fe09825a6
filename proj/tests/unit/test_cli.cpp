#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

const std::string kCli = CFPS_CLI_PATH;
const std::string kFixtures = CFPS_FIXTURE_DIR;

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string log = ::testing::TempDir() + "/cli_out.txt";
  const int status = std::system((kCli + " " + args + " > " + log + " 2>&1").c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string tmp(const std::string& name) { return ::testing::TempDir() + "/" + name; }

}  // namespace

TEST(Cli, SynthVerifyStatsRoundTrip) {
  const std::string out = tmp("cli_c.jsonl");
  auto r = run("synth --count 40 --seed 7 --out " + out);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("config_digest="), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(out + ".stats"));
  EXPECT_NE(slurp(out + ".stats").find("total=40"), std::string::npos);

  r = run("verify " + out);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("checked=40 failed=0"), std::string::npos);

  r = run("stats " + out);
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Count"), std::string::npos);
  EXPECT_NE(r.out.find("total                       40"), std::string::npos) << r.out;
}

TEST(Cli, SameFlagsSameBytes) {
  const std::string a = tmp("cli_a.jsonl"), b = tmp("cli_b.jsonl");
  ASSERT_EQ(run("synth --count 30 --seed 7 --workers 1 --out " + a).code, 0);
  ASSERT_EQ(run("synth --count 30 --seed 7 --workers 3 --out " + b).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  const std::string cfg = tmp("cli.cfg"), a = tmp("cli_cfg.jsonl"), b = tmp("cli_flag.jsonl");
  std::ofstream(cfg) << "count = 12\nseed = 3\n";
  ASSERT_EQ(run("synth --config " + cfg + " --out " + a).code, 0);
  ASSERT_EQ(run("synth --config " + cfg + " --count 5 --out " + b).code, 0);
  EXPECT_NE(slurp(a + ".stats").find("total=12"), std::string::npos);
  EXPECT_NE(slurp(b + ".stats").find("total=5"), std::string::npos);
}

TEST(Cli, VerifyFlagsCorruptedK) {
  const std::string good = tmp("cli_k.jsonl"), bad = tmp("cli_k_bad.jsonl");
  ASSERT_EQ(run("synth --count 10 --seed 2 --out " + good).code, 0);
  std::ifstream in(good);
  std::ofstream out(bad);
  std::string line, target_id;
  for (int n = 0; std::getline(in, line); ++n) {
    if (n == 4) {
      const auto p = line.find("\"k\":");
      const auto end = line.find(',', p);
      const int k = std::stoi(line.substr(p + 4, end - p - 4));
      line.replace(p + 4, end - p - 4, std::to_string(k + 1));
      const auto id = line.find("\"id\":\"") + 6;
      target_id = line.substr(id, line.find('"', id) - id);
    }
    out << line << "\n";
  }
  out.close();
  const auto r = run("verify " + bad);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("failed=1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("FAIL " + target_id), std::string::npos) << r.out;
}

TEST(Cli, GoldenFixturesVerify) {
  for (const char* f : {"example_a.jsonl", "example_b.jsonl"}) {
    const auto r = run("verify " + kFixtures + "/" + f);
    EXPECT_EQ(r.code, 0) << f << "\n" << r.out;
  }
}

TEST(Cli, RealizeTemplatedHasNoViolations) {
  const std::string c = tmp("cli_r.jsonl"), o = tmp("cli_r_nl.jsonl");
  ASSERT_EQ(run("synth --count 25 --seed 5 --out " + c).code, 0);
  const auto r = run("realize " + c + " --out " + o);
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("lint_violations=0"), std::string::npos);
  EXPECT_NE(slurp(o).find("\"nl\":{\"mode\":\"clean\""), std::string::npos);
  EXPECT_EQ(run("verify " + o).code, 0);
}

TEST(Cli, RealizeReplayMatchesRecordedOutput) {
  const std::string o = tmp("cli_replay.jsonl");
  const auto r = run("realize " + kFixtures + "/example_a.jsonl --out " + o + " --translator replay:" + kFixtures +
                     "/realize_a_transcript.jsonl");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(o), slurp(kFixtures + "/realize_a_expected.jsonl"));
}

TEST(Cli, RealizeExampleBCarriesNegatedFinalSentence) {
  // the fixture's stored text and a fresh templated pass agree on the flipped final conclusion
  const std::string text = slurp(kFixtures + "/example_b.jsonl");
  EXPECT_NE(text.find("rule 7 lets us infer that Tamsin did not learn to read tide tables."), std::string::npos);
}

TEST(Cli, EvalOracleAndConstant) {
  const std::string c = tmp("cli_e.jsonl");
  ASSERT_EQ(run("synth --count 30 --seed 9 --out " + c).code, 0);
  auto r = run("eval " + c + " --judge oracle --include-correct");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("first_error_acc=1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("all_step_acc=1.000000"), std::string::npos);
  r = run("eval " + c + " --judge constant:1");
  EXPECT_NE(r.out.find("first_error_acc=0.000000"), std::string::npos) << r.out;
  r = run("eval --pools " + kFixtures + "/pools.jsonl");
  EXPECT_NE(r.out.find("bestofk_acc=0.400000"), std::string::npos) << r.out;
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("synth --count nope --out x").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth --count 3").code, 2);  // no output path
  EXPECT_EQ(run("eval " + kFixtures + "/example_a.jsonl --judge psychic").code, 2);
  const std::string empty = tmp("cli_empty.jsonl");
  std::ofstream(empty).close();
  EXPECT_EQ(run("stats " + empty).code, 1);

  const std::string cfg = tmp("cli_exhaust.cfg");
  std::ofstream(cfg) << "count = 2\nmin_steps = 7\nmax_steps = 7\nweights = uniform\n"
                     << "weight.drop_condition = 0\nweight.implication_misuse = 0\nweight.or_and_confusion = 0\n"
                     << "weight.partial_evaluation = 0\nweight.xor_as_or = 0\nweight.xor_as_equiv = 0\n"
                     << "weight.vacuous_truth_error = 0\nweight.converse_error = 0\nweight.redundant_step = 0\n"
                     << "weight.circular_reference = 0\nmax_chains_per_instance = 10\n";
  const auto r = run("synth --config " + cfg + " --out " + tmp("cli_exhaust.jsonl"));
  EXPECT_EQ(r.code, 3) << r.out;
  EXPECT_NE(r.out.find("length-out-of-range"), std::string::npos);
}
