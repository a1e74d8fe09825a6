// First-error injection: corrupt one step of a correct chain, recompute the
// rest under the corrupted state, and check the first-error property.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cfps/chain.hpp"
#include "cfps/instance.hpp"

namespace cfps {

class InjectionInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DownstreamStuck : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error types whose requirements step k (1-based) of `c` meets, in enum order.
std::vector<ErrorType> applicable_errors(const CorrectChain& c, int k);

/// Draw proportional to `weights` over `applicable`. Throws std::invalid_argument
/// on an empty set or zero mass.
ErrorType sample_error_type(const std::map<ErrorType, double>& weights, std::span<const ErrorType> applicable,
                            std::uint64_t seed);

struct Recomputed {
  std::vector<Step> steps;
  std::vector<int> dropped;  // original indices
};

/// Re-applies original steps `resume_from`.. (1-based) by pattern application on
/// the counterfactual state built from the base facts and `corrupted_prefix`.
/// Throws DownstreamStuck when no licensed pattern of a step's rule can fire,
/// unless `allow_step_drop`.
Recomputed recompute_downstream(const CorrectChain& c, std::span<const Step> corrupted_prefix, int resume_from,
                                bool allow_step_drop = false);
/// Length-preserving form: resumes right after the prefix.
Recomputed recompute_downstream(const CorrectChain& c, std::span<const Step> corrupted_prefix);

/// State before each step, with later conclusions overwriting earlier values.
std::vector<State> counterfactual_states(std::span<const Literal> base, std::span<const Step> steps);

/// Throws InjectionInfeasible if `e` is not applicable at k.
ErroneousChain inject(const CorrectChain& c, int k, ErrorType e, std::uint64_t seed, bool allow_step_drop = false);

struct FirstErrorReport : VerificationReport {
  bool still_derivable = false;
};

FirstErrorReport verify_first_error(const Instance& inst);

enum class RejectReason : std::uint8_t {
  NotApplicable,
  Infeasible,
  StillDerivable,
  DownstreamStuck,
  LengthOutOfRange,
  VerificationFailed,
};
std::string_view to_string(RejectReason r);
inline constexpr std::array<RejectReason, 6> kAllRejectReasons = {
    RejectReason::NotApplicable,   RejectReason::Infeasible,       RejectReason::StillDerivable,
    RejectReason::DownstreamStuck, RejectReason::LengthOutOfRange, RejectReason::VerificationFailed};

struct RejectionStats {
  std::uint64_t attempts = 0;
  std::uint64_t accepted = 0;
  std::map<RejectReason, std::uint64_t> rejected;

  void reject(RejectReason r) {
    ++attempts;
    ++rejected[r];
  }
  void accept() {
    ++attempts;
    ++accepted;
  }
  std::uint64_t total_rejected() const;
  void merge(const RejectionStats& o);
};

struct CounterfactualConfig {
  std::map<ErrorType, double> weights = default_error_weights();
  int k_min = 2;   // smallest k on the correct chain
  int k_tail = 1;  // number of final steps excluded from k
  int max_attempts = 16;
  bool allow_step_drop = false;
  int min_steps = 7;  // length bounds for the erroneous chain
  int max_steps = 10;
};

struct CounterfactualResult {
  std::optional<Instance> instance;
  RejectionStats stats;
};

/// Samples k and a type, injects, and verifies; up to cfg.max_attempts tries.
/// With `only`, k is drawn among the positions where that type applies.
CounterfactualResult build_counterfactual(const CorrectChain& c, const CounterfactualConfig& cfg, std::uint64_t seed,
                                          std::optional<ErrorType> only = std::nullopt);

}  // namespace cfps
