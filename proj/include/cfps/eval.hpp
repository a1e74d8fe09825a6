// Step-level judge scoring (first_error / all_step) and Best-of-K selection rules.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfps/dataset.hpp"
#include "cfps/instance.hpp"
#include "cfps/realization.hpp"

namespace cfps {

enum class ChainKind { Correct, Erroneous };
std::string_view to_string(ChainKind c);

struct JudgeInput {
  const Instance& inst;
  ChainKind chain;
  std::span<const Step> prefix;  // steps before the current one
  const Step& current;
  int index;  // 1-based position of `current`
};

/// Scores one step in [0, 1]; higher means more likely valid.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual double score_step(const JudgeInput& in) const = 0;
  virtual std::string name() const = 0;
  /// False if calls must not overlap.
  virtual bool concurrent() const { return true; }
};

/// Prover-backed reference: 1.0 iff the step and every earlier step of its chain are valid against their prefixes.
std::unique_ptr<Judge> oracle_judge();
std::unique_ptr<Judge> constant_judge(double value);
/// Uniform scores keyed by (seed, instance id, chain, step).
std::unique_ptr<Judge> random_judge(std::uint64_t seed);
/// Lines {"id": ..., "chain": "correct"|"erroneous", "scores": [...]}.
std::unique_ptr<Judge> score_file_judge(const std::string& path);

/// Asks a translator client for a label word per step; `words` maps replies to scores.
class LabelWordJudge : public Judge {
 public:
  explicit LabelWordJudge(TranslatorClient& client,
                          std::map<std::string, double> words = {{"true", 1.0}, {"false", 0.0}});
  double score_step(const JudgeInput& in) const override;
  std::string name() const override { return "label-word"; }
  bool concurrent() const override { return false; }

 private:
  TranslatorClient& client_;
  std::map<std::string, double> words_;
  mutable std::mutex mu_;
};

/// "oracle", "constant:<v>", "random:<seed>", "scores:<path>". Throws std::invalid_argument.
std::unique_ptr<Judge> make_judge(const std::string& spec);

/// 1-based index of the first step scored below `threshold`, 0 for none.
int predicted_first_error(std::span<const double> scores, double threshold);

/// Gold and predicted first error per trajectory, 0 meaning none. Throws std::invalid_argument on length mismatch.
double first_error_accuracy(std::span<const int> predicted, std::span<const int> gold);
/// Micro average over all steps. Throws std::invalid_argument on any length mismatch.
double all_step_accuracy(const std::vector<std::vector<bool>>& predicted, const std::vector<std::vector<bool>>& gold);
/// Mean of per-trajectory step accuracy.
double all_step_accuracy_macro(const std::vector<std::vector<bool>>& predicted,
                               const std::vector<std::vector<bool>>& gold);

struct EvalOptions {
  double threshold = 0.5;
  bool erroneous_only = true;
  int workers = 1;
};

struct TypeBreakdown {
  std::uint64_t n = 0;  // trajectories
  double first_error_acc = 0.0;
  double all_step_acc = 0.0;
};

struct EvalReport {
  std::string judge;
  double threshold = 0.5;
  bool erroneous_only = true;
  std::uint64_t n_instances = 0;
  std::uint64_t n_trajectories = 0;
  std::uint64_t n_steps = 0;
  double first_error_acc = 0.0;
  double all_step_acc = 0.0;        // micro
  double all_step_acc_macro = 0.0;
  /// Erroneous trajectories whose steps before k all score at or above the threshold.
  double clean_prefix_rate = 0.0;
  std::map<ErrorType, TypeBreakdown> per_type;  // erroneous trajectories only
  /// Correct trajectories, when included.
  std::optional<TypeBreakdown> correct;

  std::string render() const;
  std::string to_json() const;
};

/// Per-step scores of one trajectory.
std::vector<double> score_chain(const Judge& judge, const Instance& inst, ChainKind chain);

EvalReport evaluate(const std::vector<Instance>& instances, const Judge& judge, const EvalOptions& opt = {});

// --- Best-of-K ----------------------------------------------------------------------------

struct Candidate {
  std::vector<double> step_scores;
  std::string answer;
  bool correct = false;
};

using CandidatePool = std::vector<Candidate>;

/// Minimum step score; a candidate without steps scores 0.
double trajectory_score(const Candidate& c);
/// Argmax of trajectory_score, lowest index on ties. Throws std::invalid_argument on an empty pool.
std::size_t bestofk_select(const CandidatePool& pool);
/// Most frequent answer; ties go to the answer whose first occurrence has the lowest index.
std::string majority_at_k(const CandidatePool& pool);
/// 1 if any candidate is correct.
int oracle_at_k(const CandidatePool& pool);

struct PoolProblem {
  std::string id;
  CandidatePool candidates;
};

/// Lines {"id": ..., "candidates": [{"scores": [...], "answer": ..., "correct": bool}, ...]}.
/// Scores must be finite and within [0, 1].
std::vector<PoolProblem> read_pools(const std::string& path);

struct SelectionReport {
  std::uint64_t problems = 0;
  double bestofk_acc = 0.0;
  double majority_acc = 0.0;  // majority answer counts as correct if its first carrier is
  double oracle_acc = 0.0;
  std::string render() const;
};

SelectionReport evaluate_pools(const std::vector<PoolProblem>& problems);

}  // namespace cfps
