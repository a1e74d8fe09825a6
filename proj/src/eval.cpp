#include "cfps/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "cfps/prover.hpp"
#include "cfps/rng.hpp"
#include "json.hpp"

namespace cfps {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ChainKind c) { return c == ChainKind::Correct ? "correct" : "erroneous"; }

namespace {

class OracleJudge : public Judge {
 public:
  double score_step(const JudgeInput& in) const override {
    const CorrectChain& c = in.inst.correct;
    std::vector<Step> all(in.prefix.begin(), in.prefix.end());
    all.push_back(in.current);
    std::vector<Step> mentioned = all;
    mentioned.insert(mentioned.end(), c.steps.begin(), c.steps.end());
    const Prover prover(Theory::from(c.rules, collect_facts(c.base_facts, c.rules, mentioned)));
    // validity is inherited: a step after an invalid one is invalid too
    State s(c.base_facts);
    for (const Step& step : all) {
      if (!assess_step(prover, s, step).valid()) return 0.0;
      s.overwrite(step.conclusion);
    }
    return 1.0;
  }
  std::string name() const override { return "oracle"; }
};

class ConstantJudge : public Judge {
 public:
  explicit ConstantJudge(double v) : v_(v) {}
  double score_step(const JudgeInput&) const override { return v_; }
  std::string name() const override {
    std::ostringstream os;
    os << "constant:" << v_;
    return os.str();
  }

 private:
  double v_;
};

class RandomJudge : public Judge {
 public:
  explicit RandomJudge(std::uint64_t seed) : seed_(seed) {}
  double score_step(const JudgeInput& in) const override {
    std::uint64_t h = fnv1a64(in.inst.id);
    h = fnv1a64(to_string(in.chain), h);
    Rng rng(derive_seed(seed_ ^ h, static_cast<std::uint64_t>(in.index)));
    return rng.unit();
  }
  std::string name() const override { return "random:" + std::to_string(seed_); }

 private:
  std::uint64_t seed_;
};

class ScoreFileJudge : public Judge {
 public:
  explicit ScoreFileJudge(const std::string& path) : path_(path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open score file " + path);
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const ojson j = ojson::parse(line);
        std::vector<double> scores = j.at("scores").get<std::vector<double>>();
        for (double x : scores)
          if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw std::invalid_argument("score outside [0, 1]");
        scores_[key(j.at("id").get<std::string>(), j.at("chain").get<std::string>())] = std::move(scores);
      } catch (const std::exception& e) {
        throw std::invalid_argument(path + ":" + std::to_string(n) + ": " + e.what());
      }
    }
  }
  double score_step(const JudgeInput& in) const override {
    auto it = scores_.find(key(in.inst.id, std::string(to_string(in.chain))));
    if (it == scores_.end()) throw std::out_of_range("no scores for " + in.inst.id + " " + std::string(to_string(in.chain)));
    if (in.index < 1 || static_cast<std::size_t>(in.index) > it->second.size())
      throw std::out_of_range("score list too short for " + in.inst.id);
    return it->second[static_cast<std::size_t>(in.index - 1)];
  }
  std::string name() const override { return "scores:" + path_; }

 private:
  static std::string key(const std::string& id, const std::string& chain) { return id + "\x1f" + chain; }
  std::string path_;
  std::unordered_map<std::string, std::vector<double>> scores_;
};

double parse_double(const std::string& s) {
  double v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

}  // namespace

std::unique_ptr<Judge> oracle_judge() { return std::make_unique<OracleJudge>(); }

std::unique_ptr<Judge> constant_judge(double value) {
  if (!std::isfinite(value) || value < 0.0 || value > 1.0) throw std::invalid_argument("constant score must be in [0, 1]");
  return std::make_unique<ConstantJudge>(value);
}

std::unique_ptr<Judge> random_judge(std::uint64_t seed) { return std::make_unique<RandomJudge>(seed); }

std::unique_ptr<Judge> score_file_judge(const std::string& path) { return std::make_unique<ScoreFileJudge>(path); }

std::unique_ptr<Judge> make_judge(const std::string& spec) {
  if (spec == "oracle") return oracle_judge();
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (kind == "constant" && !arg.empty()) return constant_judge(parse_double(arg));
  if (kind == "random" && !arg.empty()) {
    std::uint64_t seed{};
    auto r = std::from_chars(arg.data(), arg.data() + arg.size(), seed);
    if (r.ec != std::errc() || r.ptr != arg.data() + arg.size()) throw std::invalid_argument("bad random seed: " + arg);
    return random_judge(seed);
  }
  if (kind == "scores" && !arg.empty()) return score_file_judge(arg);
  throw std::invalid_argument("unknown judge spec: " + spec);
}

LabelWordJudge::LabelWordJudge(TranslatorClient& client, std::map<std::string, double> words)
    : client_(client), words_(std::move(words)) {}

double LabelWordJudge::score_step(const JudgeInput& in) const {
  const Instance& inst = in.inst;
  const NlRecord* nl = inst.nl ? &*inst.nl : nullptr;
  const std::vector<std::string>* texts =
      nl ? (in.chain == ChainKind::Correct ? &nl->correct_steps : &nl->erroneous_steps) : nullptr;
  auto step_text = [&](const Step& s, int idx) {
    return texts && idx >= 1 && static_cast<std::size_t>(idx) <= texts->size() ? (*texts)[idx - 1] : render_step(s);
  };
  std::vector<std::string> base, prev;
  if (nl) base = nl->base_facts;
  else
    for (const auto& l : inst.correct.base_facts) base.push_back(to_string(l));
  for (std::size_t i = 0; i < in.prefix.size(); ++i) prev.push_back(step_text(in.prefix[i], static_cast<int>(i) + 1));
  const PromptBundle p =
      judge_prompt(nl ? nl->goal : to_string(inst.correct.goal), base, prev, step_text(in.current, in.index));

  std::string reply;
  {
    std::lock_guard lock(mu_);
    reply = client_.send(p);
  }
  std::string word;
  for (char ch : reply) {
    if (std::isalpha(static_cast<unsigned char>(ch))) word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    else if (!word.empty()) break;
  }
  auto it = words_.find(word);
  if (it == words_.end()) throw TranslationError("judge reply has no label word: '" + reply + "'");
  return it->second;
}

// --- metrics ---------------------------------------------------------------------------

int predicted_first_error(std::span<const double> scores, double threshold) {
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] < threshold) return static_cast<int>(i) + 1;
  return 0;
}

double first_error_accuracy(std::span<const int> predicted, std::span<const int> gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  if (gold.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hit += predicted[i] == gold[i];
  return static_cast<double>(hit) / static_cast<double>(gold.size());
}

namespace {

std::pair<std::size_t, std::size_t> step_hits(const std::vector<bool>& p, const std::vector<bool>& g) {
  if (p.size() != g.size()) throw std::invalid_argument("trajectory step counts differ");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < g.size(); ++i) hit += p[i] == g[i];
  return {hit, g.size()};
}

}  // namespace

double all_step_accuracy(const std::vector<std::vector<bool>>& predicted, const std::vector<std::vector<bool>>& gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto [h, n] = step_hits(predicted[i], gold[i]);
    hit += h;
    total += n;
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 0.0;
}

double all_step_accuracy_macro(const std::vector<std::vector<bool>>& predicted,
                               const std::vector<std::vector<bool>>& gold) {
  if (predicted.size() != gold.size()) throw std::invalid_argument("prediction and gold counts differ");
  double sum = 0;
  std::size_t n_traj = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto [h, n] = step_hits(predicted[i], gold[i]);
    if (!n) continue;
    sum += static_cast<double>(h) / static_cast<double>(n);
    ++n_traj;
  }
  return n_traj ? sum / static_cast<double>(n_traj) : 0.0;
}

std::vector<double> score_chain(const Judge& judge, const Instance& inst, ChainKind chain) {
  const std::vector<Step>& steps = chain == ChainKind::Correct ? inst.correct.steps : inst.erroneous.steps;
  std::vector<double> out;
  out.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const double s = judge.score_step(
        JudgeInput{inst, chain, std::span<const Step>(steps.data(), t), steps[t], static_cast<int>(t) + 1});
    if (!std::isfinite(s)) throw std::domain_error(judge.name() + " returned a non-finite score");
    out.push_back(s);
  }
  return out;
}

namespace {

struct Trajectory {
  ChainKind chain;
  ErrorType type;
  int k;  // gold first error, 0 for none
  std::vector<double> scores;
  std::vector<bool> gold;
};

struct Tally {
  std::uint64_t n = 0, fe_hit = 0, step_hit = 0, steps = 0;
  void add(bool fe, std::size_t sh, std::size_t st) {
    ++n;
    fe_hit += fe;
    step_hit += sh;
    steps += st;
  }
  TypeBreakdown result() const {
    return {n, n ? static_cast<double>(fe_hit) / static_cast<double>(n) : 0.0,
            steps ? static_cast<double>(step_hit) / static_cast<double>(steps) : 0.0};
  }
};

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
  return std::string(buf, r.ptr);
}

}  // namespace

EvalReport evaluate(const std::vector<Instance>& instances, const Judge& judge, const EvalOptions& opt) {
  const std::size_t n = instances.size();
  std::vector<std::vector<Trajectory>> per_inst(n);

  auto run_one = [&](std::size_t i) {
    const Instance& inst = instances[i];
    const StepLabels labels = label_steps(inst);
    auto gold_of = [](const std::vector<StepLabel>& ls) {
      std::vector<bool> g;
      for (const auto& l : ls) g.push_back(l.valid);
      return g;
    };
    per_inst[i].push_back({ChainKind::Erroneous, inst.error_type(), inst.k(),
                           score_chain(judge, inst, ChainKind::Erroneous), gold_of(labels.erroneous)});
    if (!opt.erroneous_only)
      per_inst[i].push_back(
          {ChainKind::Correct, inst.error_type(), 0, score_chain(judge, inst, ChainKind::Correct), gold_of(labels.correct)});
  };

  const int workers = judge.concurrent() ? std::max(1, opt.workers) : 1;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            run_one(i);
          } catch (...) {
            std::lock_guard lock(fail_mu);
            if (!failure) failure = std::current_exception();
            next.store(n);
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  EvalReport rep;
  rep.judge = judge.name();
  rep.threshold = opt.threshold;
  rep.erroneous_only = opt.erroneous_only;
  rep.n_instances = n;

  std::vector<int> pred_fe, gold_fe;
  std::vector<std::vector<bool>> pred_steps, gold_steps;
  std::map<ErrorType, Tally> by_type;
  Tally correct;
  std::uint64_t erroneous = 0, clean_prefix = 0;
  for (const auto& trajs : per_inst) {
    for (const Trajectory& tr : trajs) {
      const int p = predicted_first_error(tr.scores, opt.threshold);
      std::vector<bool> ps;
      for (double s : tr.scores) ps.push_back(s >= opt.threshold);
      const auto [sh, st] = step_hits(ps, tr.gold);
      pred_fe.push_back(p);
      gold_fe.push_back(tr.k);
      pred_steps.push_back(ps);
      gold_steps.push_back(tr.gold);
      rep.n_steps += st;
      if (tr.chain == ChainKind::Erroneous) {
        by_type[tr.type].add(p == tr.k, sh, st);
        ++erroneous;
        clean_prefix += std::all_of(tr.scores.begin(), tr.scores.begin() + std::max(0, tr.k - 1),
                                    [&](double s) { return s >= opt.threshold; });
      } else {
        correct.add(p == 0, sh, st);
      }
    }
  }
  rep.n_trajectories = gold_fe.size();
  rep.first_error_acc = first_error_accuracy(pred_fe, gold_fe);
  rep.all_step_acc = all_step_accuracy(pred_steps, gold_steps);
  rep.all_step_acc_macro = all_step_accuracy_macro(pred_steps, gold_steps);
  rep.clean_prefix_rate = erroneous ? static_cast<double>(clean_prefix) / static_cast<double>(erroneous) : 0.0;
  for (const auto& [e, t] : by_type) rep.per_type[e] = t.result();
  if (!opt.erroneous_only) rep.correct = correct.result();
  return rep;
}

std::string EvalReport::render() const {
  std::ostringstream os;
  os << "judge=" << judge << "\n";
  os << "threshold=" << fmt(threshold) << "\n";
  os << "erroneous_only=" << (erroneous_only ? "true" : "false") << "\n";
  os << "n_instances=" << n_instances << "\n";
  os << "n_trajectories=" << n_trajectories << "\n";
  os << "n_steps=" << n_steps << "\n";
  os << "first_error_acc=" << fmt(first_error_acc) << "\n";
  os << "all_step_acc=" << fmt(all_step_acc) << "\n";
  os << "all_step_acc_macro=" << fmt(all_step_acc_macro) << "\n";
  os << "clean_prefix_rate=" << fmt(clean_prefix_rate) << "\n";
  for (const auto& [e, b] : per_type) {
    os << "type." << to_string(e) << ".n=" << b.n << "\n";
    os << "type." << to_string(e) << ".first_error_acc=" << fmt(b.first_error_acc) << "\n";
    os << "type." << to_string(e) << ".all_step_acc=" << fmt(b.all_step_acc) << "\n";
  }
  if (correct) {
    os << "correct.n=" << correct->n << "\n";
    os << "correct.first_error_acc=" << fmt(correct->first_error_acc) << "\n";
    os << "correct.all_step_acc=" << fmt(correct->all_step_acc) << "\n";
  }
  return os.str();
}

std::string EvalReport::to_json() const {
  ojson j;
  j["judge"] = judge;
  j["threshold"] = threshold;
  j["erroneous_only"] = erroneous_only;
  j["n_instances"] = n_instances;
  j["n_trajectories"] = n_trajectories;
  j["n_steps"] = n_steps;
  j["first_error_acc"] = first_error_acc;
  j["all_step_acc"] = all_step_acc;
  j["all_step_acc_macro"] = all_step_acc_macro;
  j["clean_prefix_rate"] = clean_prefix_rate;
  ojson types = ojson::object();
  for (const auto& [e, b] : per_type)
    types[std::string(to_string(e))] = {{"n", b.n}, {"first_error_acc", b.first_error_acc}, {"all_step_acc", b.all_step_acc}};
  j["per_type"] = std::move(types);
  if (correct)
    j["correct"] = {{"n", correct->n}, {"first_error_acc", correct->first_error_acc}, {"all_step_acc", correct->all_step_acc}};
  return j.dump();
}

// --- Best-of-K ----------------------------------------------------------------------------

double trajectory_score(const Candidate& c) {
  if (c.step_scores.empty()) return 0.0;
  return *std::min_element(c.step_scores.begin(), c.step_scores.end());
}

std::size_t bestofk_select(const CandidatePool& pool) {
  if (pool.empty()) throw std::invalid_argument("empty candidate pool");
  std::size_t best = 0;
  double best_score = trajectory_score(pool[0]);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double s = trajectory_score(pool[i]);
    if (s > best_score) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

std::string majority_at_k(const CandidatePool& pool) {
  if (pool.empty()) throw std::invalid_argument("empty candidate pool");
  std::vector<std::pair<std::string, std::size_t>> counts;  // first-occurrence order
  for (const auto& c : pool) {
    auto it = std::find_if(counts.begin(), counts.end(), [&](const auto& p) { return p.first == c.answer; });
    if (it == counts.end()) counts.emplace_back(c.answer, 1);
    else ++it->second;
  }
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  return best->first;
}

int oracle_at_k(const CandidatePool& pool) {
  if (pool.empty()) throw std::invalid_argument("empty candidate pool");
  return std::any_of(pool.begin(), pool.end(), [](const Candidate& c) { return c.correct; }) ? 1 : 0;
}

std::vector<PoolProblem> read_pools(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open pool file " + path);
  std::vector<PoolProblem> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const ojson j = ojson::parse(line);
      PoolProblem p;
      p.id = j.at("id").get<std::string>();
      for (const auto& c : j.at("candidates")) {
        Candidate cand{c.at("scores").get<std::vector<double>>(), c.at("answer").get<std::string>(),
                       c.at("correct").get<bool>()};
        for (double s : cand.step_scores)
          if (!std::isfinite(s) || s < 0.0 || s > 1.0) throw std::invalid_argument("score outside [0, 1]");
        p.candidates.push_back(std::move(cand));
      }
      if (p.candidates.empty()) throw std::invalid_argument("problem has no candidates");
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

SelectionReport evaluate_pools(const std::vector<PoolProblem>& problems) {
  SelectionReport r;
  r.problems = problems.size();
  if (problems.empty()) return r;
  std::uint64_t best = 0, maj = 0, orc = 0;
  for (const auto& p : problems) {
    best += p.candidates[bestofk_select(p.candidates)].correct;
    const std::string m = majority_at_k(p.candidates);
    maj += std::find_if(p.candidates.begin(), p.candidates.end(), [&](const Candidate& c) { return c.answer == m; })->correct;
    orc += oracle_at_k(p.candidates);
  }
  const double d = static_cast<double>(problems.size());
  r.bestofk_acc = static_cast<double>(best) / d;
  r.majority_acc = static_cast<double>(maj) / d;
  r.oracle_acc = static_cast<double>(orc) / d;
  return r;
}

std::string SelectionReport::render() const {
  std::ostringstream os;
  os << "pool_problems=" << problems << "\n";
  os << "bestofk_acc=" << fmt(bestofk_acc) << "\n";
  os << "majority_acc=" << fmt(majority_acc) << "\n";
  os << "oracle_acc=" << fmt(oracle_acc) << "\n";
  return os.str();
}

}  // namespace cfps
