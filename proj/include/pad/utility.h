// SPDX-License-Identifier: Apache-2.0
//
// Binary utilities, Monte Carlo and exact expected-utility estimation, the
// ground-truth pivot oracle and the utility-preservation checker.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/lm_core.h"
#include "pad/sd_verify.h"

namespace pad {

// u(y, x) = 1 iff eval(y, x) >= theta_eval. `eval` may throw; errors
// propagate and are never mapped to 0.
struct UtilityFn {
  std::function<double(std::span<const TokenId> output, std::span<const TokenId> context)> eval;
  double theta_eval = 1.0;
  std::string name;
};

int utility(std::span<const TokenId> output, std::span<const TokenId> context,
            const UtilityFn& u);

// Output tokens up to (excluding) the first EOS.
std::span<const TokenId> strip_eos(std::span<const TokenId> output);

// 1 iff `pattern` occurs as a contiguous run before EOS.
UtilityFn substring_utility(TokenSeq pattern);
// 1 iff the output token sum mod V equals the context token sum mod V.
UtilityFn checksum_utility(int vocab_size);
UtilityFn make_utility(const UtilitySpec& spec, int vocab_size);

// Residue the checksum task asks for, given a context.
int checksum_residue(std::span<const TokenId> context, int vocab_size);

// Monte Carlo estimate (exact == false) or exact enumeration (exact == true,
// in which case n and successes are 0 and only `mean` is meaningful).
struct RolloutEstimate {
  double mean = 0.0;
  int n = 0;
  int successes = 0;
  bool exact = false;

  // Binomial standard error of the mean; 0 for exact values.
  double standard_error() const;
};

struct ScoredRollout {
  TokenSeq output;  // prefix + sampled completion
  int utility = 0;
};

// Completes prompt+prefix with the model n times. Each output is evaluated
// as a whole (prefix included); completion length is capped so the full
// output never exceeds params.max_len.
std::vector<ScoredRollout> sample_rollouts(const SequenceModel& model,
                                           std::span<const TokenId> prompt,
                                           std::span<const TokenId> prefix, const UtilityFn& u,
                                           int n, const GenerationParams& params, Rng& rng);

RolloutEstimate summarize(std::span<const ScoredRollout> rollouts);

RolloutEstimate expected_utility(const SequenceModel& model, std::span<const TokenId> prompt,
                                 std::span<const TokenId> prefix, const UtilityFn& u, int n,
                                 const GenerationParams& params, Rng& rng);

inline constexpr double kMaxEnumeratedOutcomes = 1e4;

// True when V^h <= 1e4 for the remaining horizon h = max_len - |prefix|.
bool is_enumerable(int vocab_size, std::size_t prefix_len, const GenerationParams& params);

// Exact U(p, prompt + prefix) by summing over every completion.
double exact_expected_utility(const SequenceModel& model, std::span<const TokenId> prompt,
                              std::span<const TokenId> prefix, const UtilityFn& u,
                              const GenerationParams& params);

struct PivotOracleConfig {
  double epsilon = 0.0;
  int n_rollouts = 8;
  GenerationParams params;
  // Use exact enumeration whenever the remaining outcome space is small.
  bool exact_when_enumerable = true;

  void validate() const;
};

struct PivotVerdict {
  bool pivot = false;
  double u_base = 0.0;
  double u_cand = 0.0;
  bool exact = false;
};

// pivot iff U(prefix + candidate) <= U(prefix) - epsilon. Ties count as pivot.
PivotVerdict pivot_verdict(const SequenceModel& target, std::span<const TokenId> prompt,
                           std::span<const TokenId> prefix, TokenId candidate,
                           const PivotOracleConfig& cfg, const UtilityFn& u, Rng& rng);

bool is_pivot_oracle(const SequenceModel& target, std::span<const TokenId> prompt,
                     std::span<const TokenId> prefix, TokenId candidate,
                     const PivotOracleConfig& cfg, const UtilityFn& u, Rng& rng);

struct PreservationReport {
  double utility_a = 0.0;
  double utility_b = 0.0;
  double gap = 0.0;  // E[U(A)] - E[U(B)]
  double gap_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double epsilon = 0.0;
  // gap >= -epsilon within the confidence interval (ci_high >= -epsilon).
  bool preserved = false;
  std::size_t contexts = 0;
};

// Paired per-context comparison with n rollouts per decoder per context.
// Context i uses streams derived from (seed, i), shared by both decoders.
PreservationReport check_utility_preservation(const Decoder& a, const Decoder& b,
                                              std::span<const TokenSeq> contexts,
                                              const UtilityFn& u, int n, double epsilon,
                                              std::uint64_t seed, int jobs = 1,
                                              double z = 1.96);

}  // namespace pad
