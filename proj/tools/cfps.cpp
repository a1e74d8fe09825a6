// cfps: synthesize, verify, realize, evaluate and summarize first-error corpora.
//
// Exit codes: 0 ok, 1 verification or lint failure, 2 usage, 3 exhaustion.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cfps/dataset.hpp"
#include "cfps/eval.hpp"
#include "cfps/realization.hpp"

using namespace cfps;

namespace {

constexpr int kOk = 0, kFailed = 1, kUsage = 2, kExhausted = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  return out;
}

void print_histogram(std::ostream& os, const CorpusStats& st) {
  os << "rejections after " << st.rejections.attempts << " counterfactual attempts:\n";
  for (RejectReason r : kAllRejectReasons) {
    auto it = st.rejections.rejected.find(r);
    os << "  " << std::left << std::setw(22) << to_string(r) << (it == st.rejections.rejected.end() ? 0 : it->second)
       << "\n";
  }
  os << "  chains_synthesized    " << st.chains_synthesized << "\n";
  os << "  synthesis_exhausted   " << st.synthesis_exhausted << "\n";
}

// --- synth ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, weights, out, stats_out;
  std::optional<std::uint64_t> count, seed;
  std::optional<int> workers;
};

int cmd_synth(const SynthArgs& a) {
  CorpusConfig cfg;
  try {
    if (!a.config.empty())
      for (const auto& [k, v] : read_flat_kv_file(a.config)) cfg.set(k, v);
    if (a.count) cfg.total_count = *a.count;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.weights.empty()) cfg.set("weights", a.weights);
    if (a.workers) cfg.workers = *a.workers;
    if (!a.out.empty()) cfg.output_path = a.out;
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (cfg.output_path.empty()) throw UsageError("no output path: pass --out or set out in the config file");

  const std::string digest = cfg.digest();
  std::cerr << "config_digest=" << digest << "\n";
  CorpusStats st;
  {
    std::ofstream out = open_out(cfg.output_path);
    try {
      st = generate_corpus(cfg, out);
    } catch (const CorpusExhausted& e) {
      out.close();
      std::filesystem::remove(cfg.output_path);
      std::cerr << "synthesis exhausted: " << e.what() << "\n";
      print_histogram(std::cerr, e.stats());
      return kExhausted;
    }
  }
  const std::string stats_path = a.stats_out.empty() ? cfg.output_path + ".stats" : a.stats_out;
  open_out(stats_path) << st.render(kSchemaVersion, digest);
  std::cout << "wrote " << st.total << " instances to " << cfg.output_path << "\n";
  std::cout << "schema_version=" << kSchemaVersion << " config_digest=" << digest << "\n";
  return kOk;
}

// --- verify ----------------------------------------------------------------------------

int cmd_verify(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::string line;
  std::size_t n = 0, checked = 0, failed = 0;
  std::string digest = "none";
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.find("\"record\":\"header\"") != std::string::npos) {
      std::istringstream one(line);
      const Corpus c = read_corpus(one);
      digest = c.header->config_digest;
      if (!c.header->config.empty() && digest_of(c.header->config) != digest) {
        std::cout << "FAIL header: config digest does not match the recorded config\n";
        ++failed;
      }
      continue;
    }
    ++checked;
    Instance inst;
    try {
      inst = deserialize(line, n);
    } catch (const DatasetError& e) {
      std::cout << "FAIL line " << n << ": " << e.what() << "\n";
      ++failed;
      continue;
    }
    std::vector<std::string> why;
    const auto cr = verify_chain(inst.correct);
    for (const auto& f : cr.failures) why.push_back("correct chain: " + f);
    if (cr.valid) {
      const auto fr = verify_first_error(inst);
      for (const auto& f : fr.failures) why.push_back(f);
    }
    if (const auto stored = stored_labels(line, n)) {
      const auto derived = label_steps(inst);
      if (stored->correct != derived.correct || stored->erroneous != derived.erroneous)
        why.push_back("stored labels disagree with k");
    }
    if (!why.empty()) {
      ++failed;
      std::cout << "FAIL " << inst.id << ": " << why.front();
      if (why.size() > 1) std::cout << " (+" << why.size() - 1 << " more)";
      std::cout << "\n";
    }
  }
  std::cout << "schema_version=" << kSchemaVersion << " config_digest=" << digest << "\n";
  std::cout << "checked=" << checked << " failed=" << failed << "\n";
  return failed ? kFailed : kOk;
}

// --- realize ---------------------------------------------------------------------------

struct RealizeArgs {
  std::string input, out, mode = "clean", translator = "templated", transcript_out;
};

int cmd_realize(const RealizeArgs& a) {
  NlMode mode;
  try {
    mode = nl_mode_from_string(a.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Corpus corpus = read_corpus_file(a.input);

  std::unique_ptr<TranslatorClient> backend;
  if (a.translator.starts_with("replay:")) backend = ReplayTranslator::from_file(a.translator.substr(7));
  else if (a.translator == "http") backend = std::make_unique<HttpTranslator>(HttpTranslatorConfig::from_env());
  else if (a.translator != "templated") throw UsageError("unknown translator: " + a.translator);
  std::optional<RecordingTranslator> recorder;
  TranslatorClient* client = backend.get();
  if (backend && !a.transcript_out.empty()) client = &recorder.emplace(*backend);

  std::size_t violations = 0;
  for (Instance& inst : corpus.instances) {
    PredicateMap map;
    if (client) {
      inst.context.background = client->send(background_prompt(inst.context.name));
      map = build_predicate_map(inst, *client);
    } else {
      map = build_predicate_map(inst, inst.seed);
    }
    inst.nl = realize_instance(inst, map, mode, inst.seed);
    for (const auto& v : leak_lint(*inst.nl, inst.k())) {
      ++violations;
      std::cout << "LINT " << inst.id << " step " << v.step << ": '" << v.term << "' at " << v.offset << "\n";
    }
  }

  if (!corpus.header) {
    corpus.header = CorpusHeader{};
    corpus.header->config_digest = "none";
  }
  corpus.header->extensions["nl_mode"] = "\"" + std::string(to_string(mode)) + "\"";
  corpus.header->extensions["translator"] = "\"" + (backend ? a.translator.substr(0, a.translator.find(':')) : std::string("templated")) + "\"";
  {
    std::ofstream out = open_out(a.out);
    write_corpus(out, corpus);
  }
  if (recorder) {
    std::ofstream t = open_out(a.transcript_out);
    recorder->write(t);
  }
  std::cout << "schema_version=" << kSchemaVersion << " config_digest=" << corpus.header->config_digest << "\n";
  std::cout << "realized=" << corpus.instances.size() << " nl_mode=" << to_string(mode) << " lint_violations=" << violations
            << "\n";
  return (mode == NlMode::Clean && violations) ? kFailed : kOk;
}

// --- eval ----------------------------------------------------------------------------------

struct EvalArgs {
  std::string corpus, judge = "oracle", pools, report_out, json_out;
  double threshold = 0.5;
  bool include_correct = false;
  int workers = 1;
};

int cmd_eval(const EvalArgs& a) {
  if (a.corpus.empty() && a.pools.empty()) throw UsageError("eval needs a corpus, --pools, or both");
  std::ostringstream report;
  std::string json;
  report << "schema_version=" << kSchemaVersion << "\n";
  if (!a.corpus.empty()) {
    const Corpus corpus = read_corpus_file(a.corpus);
    std::unique_ptr<Judge> judge;
    std::unique_ptr<TranslatorClient> llm;
    if (a.judge == "llm") {
      llm = std::make_unique<HttpTranslator>(HttpTranslatorConfig::from_env());
      judge = std::make_unique<LabelWordJudge>(*llm);
    } else {
      try {
        judge = make_judge(a.judge);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
    }
    EvalOptions opt;
    opt.threshold = a.threshold;
    opt.erroneous_only = !a.include_correct;
    opt.workers = a.workers;
    const EvalReport r = evaluate(corpus.instances, *judge, opt);
    report << "config_digest=" << (corpus.header ? corpus.header->config_digest : "none") << "\n" << r.render();
    json = r.to_json();
  }
  if (!a.pools.empty()) report << evaluate_pools(read_pools(a.pools)).render();
  std::cout << report.str();
  if (!a.report_out.empty()) open_out(a.report_out) << report.str();
  if (!a.json_out.empty() && !json.empty()) open_out(a.json_out) << json << "\n";
  return kOk;
}

// --- stats -------------------------------------------------------------------------------

int cmd_stats(const std::string& path) {
  const Corpus corpus = read_corpus_file(path);
  if (corpus.instances.empty()) {
    std::cerr << "empty corpus: " << path << "\n";
    return kFailed;
  }
  const CorpusStats st = summarize(corpus.instances);
  std::vector<std::pair<ErrorType, std::uint64_t>> rows(st.accepted.begin(), st.accepted.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
  std::cout << "schema_version=" << kSchemaVersion
            << " config_digest=" << (corpus.header ? corpus.header->config_digest : "none") << "\n";
  std::cout << std::left << std::setw(22) << "error_type" << std::right << std::setw(8) << "Count" << std::setw(9)
            << "Share" << "\n";
  std::cout << std::fixed << std::setprecision(1);
  for (const auto& [e, n] : rows)
    std::cout << std::left << std::setw(22) << to_string(e) << std::right << std::setw(8) << n << std::setw(8)
              << 100.0 * static_cast<double>(n) / static_cast<double>(st.total) << "%\n";
  std::cout << std::left << std::setw(22) << "total" << std::right << std::setw(8) << st.total << std::setw(8) << 100.0
            << "%\n";
  std::cout << std::setprecision(2) << "mean_steps correct=" << st.mean_correct_steps
            << " erroneous=" << st.mean_erroneous_steps << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"First-error counterfactual corpus tool"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "generate a corpus");
  synth->add_option("--config", sa.config, "flat key = value config file")->check(CLI::ExistingFile);
  synth->add_option("--count", sa.count, "number of instances");
  synth->add_option("--seed", sa.seed, "master seed");
  synth->add_option("--weights", sa.weights, "default, uniform, or a file of error_type = weight lines");
  synth->add_option("--out", sa.out, "corpus output path");
  synth->add_option("--stats-out", sa.stats_out, "stats report path (default <out>.stats)");
  synth->add_option("--workers", sa.workers, "worker threads")->check(CLI::PositiveNumber);

  std::string verify_path;
  auto* verify = app.add_subcommand("verify", "re-verify every instance of a corpus");
  verify->add_option("corpus", verify_path)->required();

  RealizeArgs ra;
  auto* realize = app.add_subcommand("realize", "attach natural-language text");
  realize->add_option("corpus", ra.input)->required();
  realize->add_option("--out", ra.out)->required();
  realize->add_option("--nl-mode", ra.mode, "clean or annotated")->check(CLI::IsMember({"clean", "annotated"}));
  realize->add_option("--translator", ra.translator, "templated, replay:<transcript>, or http");
  realize->add_option("--transcript-out", ra.transcript_out, "record translator traffic");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "score a judge and/or Best-of-K pools");
  eval->add_option("corpus", ea.corpus);
  eval->add_option("--judge", ea.judge, "oracle, constant:<v>, random:<seed>, scores:<file>, or llm");
  eval->add_option("--threshold", ea.threshold)->check(CLI::Range(0.0, 1.0));
  eval->add_flag("--include-correct", ea.include_correct, "also score correct trajectories");
  eval->add_option("--pools", ea.pools, "candidate pool file");
  eval->add_option("--report-out", ea.report_out);
  eval->add_option("--json-out", ea.json_out);
  eval->add_option("--workers", ea.workers)->check(CLI::PositiveNumber);

  std::string stats_path;
  auto* stats = app.add_subcommand("stats", "per-type counts and shares");
  stats->add_option("corpus", stats_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*verify) return cmd_verify(verify_path);
    if (*realize) return cmd_realize(ra);
    if (*eval) return cmd_eval(ea);
    if (*stats) return cmd_stats(stats_path);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}
