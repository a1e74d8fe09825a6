// Natural-language realization of symbolic instances: an offline template engine,
// a translator client interface for external text generation, and a leak linter.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cfps/instance.hpp"

namespace cfps {

enum class NlMode { Clean, Annotated };
NlMode nl_mode_from_string(std::string_view s);  // throws std::invalid_argument
std::string_view to_string(NlMode m);

/// Deterministic protagonist name and background paragraph.
ContextProfile make_context(std::uint64_t seed);

/// Built-in predicate frame; `{name}` in the sentences is replaced by the protagonist.
struct PredicateFrame {
  std::string predicate;
  std::string positive;
  std::string negative;
};
const std::vector<PredicateFrame>& predicate_lexicon();

/// Per-template rule phrasings over `{A}`, `{B}`, `{C}` (positive clauses).
const std::vector<std::string>& rule_frames(RuleTemplate t);

// --- translator contract ---------------------------------------------------------

struct PromptMessage {
  std::string role;  // system | user
  std::string content;
  friend bool operator==(const PromptMessage&, const PromptMessage&) = default;
};

struct PromptBundle {
  std::string purpose;  // background | predicate_map | rule | step | judge
  std::vector<PromptMessage> messages;
  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Stable digest of a bundle, used to match replayed transcripts.
std::string bundle_digest(const PromptBundle& b);

class TranslationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TranslatorClient {
 public:
  virtual ~TranslatorClient() = default;
  virtual std::string send(const PromptBundle& prompt) = 0;
};

/// Serves responses from a transcript file, in order. Each line:
/// {"purpose": ..., "request_digest": ..., "response": ...}; the digest is optional.
class ReplayTranslator : public TranslatorClient {
 public:
  explicit ReplayTranslator(std::istream& transcript);
  static std::unique_ptr<ReplayTranslator> from_file(const std::string& path);
  std::string send(const PromptBundle& prompt) override;
  std::size_t remaining() const { return entries_.size() - next_; }

 private:
  struct Entry {
    std::string purpose, digest, response;
  };
  std::vector<Entry> entries_;
  std::size_t next_ = 0;
};

/// Forwards to another client and keeps a transcript in replay format.
class RecordingTranslator : public TranslatorClient {
 public:
  explicit RecordingTranslator(TranslatorClient& inner) : inner_(inner) {}
  std::string send(const PromptBundle& prompt) override;
  void write(std::ostream& out) const;

 private:
  TranslatorClient& inner_;
  std::vector<std::string> lines_;
};

struct HttpTranslatorConfig {
  std::string endpoint;  // http://host:port/path
  std::string api_key;
  std::string model;
  int timeout_seconds = 60;
  int retries = 2;

  /// TRANSLATOR_ENDPOINT, TRANSLATOR_API_KEY, TRANSLATOR_MODEL.
  static HttpTranslatorConfig from_env();
};

/// Chat-completions style POST. Plain HTTP unless built with OpenSSL.
class HttpTranslator : public TranslatorClient {
 public:
  explicit HttpTranslator(HttpTranslatorConfig cfg);
  std::string send(const PromptBundle& prompt) override;

 private:
  HttpTranslatorConfig cfg_;
};

// --- prompt builders ---------------------------------------------------------------

PromptBundle background_prompt(const std::string& name);
PromptBundle predicate_map_prompt(const ContextProfile& ctx, const std::vector<FactId>& facts);
PromptBundle rule_prompt(const ContextProfile& ctx, const PredicateMap& map, const Rule& rule);
PromptBundle step_prompt(const ContextProfile& ctx, const PredicateMap& map, const Step& step);
/// Step-judging request: goal, initial facts, earlier steps, current step; answer is a label word.
PromptBundle judge_prompt(const std::string& goal, const std::vector<std::string>& base_facts,
                          const std::vector<std::string>& previous_steps, const std::string& current_step);

// --- predicate maps and realization --------------------------------------------

/// Facts mentioned anywhere in the instance, ascending.
std::vector<FactId> instance_facts(const Instance& inst);

/// Throws TranslationError naming the first missing symbol, duplicate predicate or empty sentence.
void validate_predicate_map(const PredicateMap& map, const std::vector<FactId>& facts);

/// Offline: distinct lexicon frames drawn by seed. Throws std::length_error if the
/// instance has more facts than the lexicon.
PredicateMap build_predicate_map(const Instance& inst, std::uint64_t seed);

/// External: asks the translator for a JSON object keyed by fact symbol with
/// "predicate", "true" and "false" members; retries on validation failure.
PredicateMap build_predicate_map(const Instance& inst, TranslatorClient& client, int retries = 2);

/// Sentence for a literal under `map`.
const std::string& sentence(const PredicateMap& map, const Literal& lit);

NlRecord realize_instance(const Instance& inst, const PredicateMap& map, NlMode mode, std::uint64_t seed = 0);

struct LintViolation {
  int step;  // 1-based, erroneous chain
  std::string term;
  std::size_t offset;
  friend bool operator==(const LintViolation&, const LintViolation&) = default;
};

const std::vector<std::string>& forbidden_terms();

/// Case-insensitive whole-word scan of `text`.
std::vector<LintViolation> lint_text(std::string_view text, int step);
/// Scans erroneous-chain step texts for steps t >= k.
std::vector<LintViolation> leak_lint(const NlRecord& nl, int k);

}  // namespace cfps
