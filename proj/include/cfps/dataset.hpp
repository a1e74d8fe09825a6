// Labels, versioned line-delimited records, configuration, and corpus generation.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfps/chain.hpp"
#include "cfps/injection.hpp"
#include "cfps/instance.hpp"

namespace cfps {

inline constexpr int kSchemaVersion = 1;

// --- labels ----------------------------------------------------------------------

enum class LabelStrategy { AllAfterError };
LabelStrategy label_strategy_from_string(std::string_view name);  // throws std::invalid_argument
std::string_view to_string(LabelStrategy s);

struct StepLabel {
  int index;
  bool valid;
  friend bool operator==(const StepLabel&, const StepLabel&) = default;
};

struct StepLabels {
  std::vector<StepLabel> correct;
  std::vector<StepLabel> erroneous;
};

StepLabels label_steps(const Instance& inst, LabelStrategy strategy = LabelStrategy::AllAfterError);

// --- records -----------------------------------------------------------------------

class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::size_t line) : std::runtime_error(format(what, line)), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  static std::string format(const std::string& what, std::size_t line) {
    return line ? "line " + std::to_string(line) + ": " + what : what;
  }
  std::size_t line_;
};

class SchemaMismatch : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

class MalformedRecord : public DatasetError {
 public:
  using DatasetError::DatasetError;
};

/// One compact JSON line (no trailing newline).
std::string serialize(const Instance& inst);
/// Parses one instance line; `line` is reported in errors.
Instance deserialize(const std::string& record, std::size_t line = 0);
/// Label vectors as written in the record, if present (they are derived on write).
std::optional<StepLabels> stored_labels(const std::string& record, std::size_t line = 0);

struct CorpusHeader {
  int schema_version = kSchemaVersion;
  std::vector<std::pair<std::string, std::string>> config;
  std::string config_digest;
  /// Raw JSON of header fields this version does not know.
  std::map<std::string, std::string> extensions;
};

std::string serialize_header(const CorpusHeader& h);

struct Corpus {
  std::optional<CorpusHeader> header;
  std::vector<Instance> instances;
};

/// Reads header and instance lines; blank lines are skipped.
Corpus read_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);

/// Seeded hash split: "train", "val" or "test".
std::string split_of(const std::string& id, std::uint64_t seed, double train_fraction = 0.8, double val_fraction = 0.1);

// --- configuration -------------------------------------------------------------

/// Flat `key = value` text; `#` starts a comment. Throws std::invalid_argument.
std::vector<std::pair<std::string, std::string>> parse_flat_kv(std::istream& in, const std::string& source = "");
std::vector<std::pair<std::string, std::string>> read_flat_kv_file(const std::string& path);

struct CorpusConfig {
  std::uint64_t total_count = 1000;
  std::uint64_t seed = 0;
  std::map<ErrorType, double> weights = default_error_weights();
  SynthesisConfig synthesis;
  int k_min = 2;
  int k_tail = 1;
  int counterfactual_attempts = 16;
  bool allow_step_drop = false;
  /// Chains tried per instance before generation is declared exhausted.
  int max_chains_per_instance = 5000;
  int workers = 1;
  std::string output_path;
  int schema_version = kSchemaVersion;

  /// Applies one key; throws std::invalid_argument on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  /// Effective configuration in a fixed key order (workers and paths excluded).
  std::vector<std::pair<std::string, std::string>> to_kv() const;
  std::string digest() const;
  CounterfactualConfig counterfactual() const;
};

/// 16 hex digits of FNV-1a over `key=value` lines.
std::string digest_of(const std::vector<std::pair<std::string, std::string>>& kv);

/// `error_type = weight` lines; every listed name must be a known type.
std::map<ErrorType, double> parse_weights(const std::vector<std::pair<std::string, std::string>>& kv);

struct CorpusStats {
  std::uint64_t total = 0;
  std::map<ErrorType, std::uint64_t> accepted;
  RejectionStats rejections;
  std::uint64_t chains_synthesized = 0;
  std::uint64_t synthesis_exhausted = 0;
  double mean_correct_steps = 0.0;
  double mean_erroneous_steps = 0.0;
  std::set<RuleTemplate> templates_used;

  std::map<ErrorType, double> shares() const;
  /// Flat key=value report.
  std::string render(int schema_version, const std::string& config_digest) const;
};

/// Stats derivable from the instances alone (no rejection counts).
CorpusStats summarize(const std::vector<Instance>& instances);

class CorpusExhausted : public std::runtime_error {
 public:
  CorpusExhausted(const std::string& what, CorpusStats stats) : std::runtime_error(what), stats_(std::move(stats)) {}
  const CorpusStats& stats() const { return stats_; }

 private:
  CorpusStats stats_;
};

/// Instance `index` of a corpus; deterministic in (cfg, index). Stats are accumulated into `stats`.
std::optional<Instance> generate_instance(const CorpusConfig& cfg, std::uint64_t index, CorpusStats& stats);

/// Generates cfg.total_count instances in index order, in parallel over cfg.workers.
/// Writes the header and records to `out`. Throws CorpusExhausted.
CorpusStats generate_corpus(const CorpusConfig& cfg, std::ostream& out);

std::string instance_id(std::uint64_t index);

}  // namespace cfps
