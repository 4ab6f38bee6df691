// SPDX-License-Identifier: Apache-2.0
//
// Speculative decoding: block proposal, verification with a pluggable
// acceptance policy, residual resampling and the bonus token.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/lm_core.h"

namespace pad {

struct DraftBlock {
  TokenSeq tokens;
  // Adjusted draft probability of each proposed token given its prefix.
  std::vector<double> draft_probs;
  // Full adjusted draft distribution at each position (needed for residuals).
  std::vector<Distribution> draft_dists;
  TokenSeq base_context;

  std::size_t size() const { return tokens.size(); }
};

enum class Decision { kAccept, kReject };
enum class DecisionSource { kSdAccept, kSdReject, kPadOverride };

std::string to_string(Decision d);
std::string to_string(DecisionSource s);

struct PositionRecord {
  int position = 0;
  TokenId draft_token = 0;
  double p_target = 0.0;
  double p_draft = 0.0;
  double coin = 0.0;
  Decision decision = Decision::kAccept;
  DecisionSource source = DecisionSource::kSdAccept;
};

struct VerifyOutcome {
  TokenSeq emitted;
  int accepted_len = 0;
  // Number of proposed tokens in the block (<= gamma).
  int block_len = 0;
  bool got_bonus = false;
  // Number of pivot-scorer queries made while verifying.
  int score_queries = 0;
  // All coins drawn for the block, including positions never examined.
  std::vector<double> coins;
  std::vector<PositionRecord> records;
};

// Everything a policy may inspect for one draft position. `prompt` and
// `generated` together form the conditioning context.
struct PositionInput {
  std::span<const TokenId> prompt;
  std::span<const TokenId> generated;
  TokenId candidate = 0;
  double p_target = 0.0;
  double p_draft = 0.0;
  double coin = 0.0;
  const Distribution* target_dist = nullptr;  // adjusted target distribution
  const SequenceModel* target = nullptr;
};

struct PolicyDecision {
  Decision decision = Decision::kAccept;
  DecisionSource source = DecisionSource::kSdAccept;
  bool scored = false;
};

class AcceptancePolicy {
 public:
  virtual ~AcceptancePolicy() = default;
  virtual PolicyDecision decide(const PositionInput& in) const = 0;
};

// Accepts iff coin < min(1, p_target / p_draft).
class StandardPolicy final : public AcceptancePolicy {
 public:
  PolicyDecision decide(const PositionInput& in) const override;
};

// min(1, p_target / p_draft). Throws std::invalid_argument if p_draft <= 0.
double accept_probability(double p_target_tok, double p_draft_tok);

// norm(max(0, p_target - p_draft)). Throws DegenerateResidualError when the
// two distributions leave no positive residual mass.
Distribution residual_distribution(const Distribution& p_target, const Distribution& p_draft);

// Exact law of the token emitted at a single SD position:
// min(p_t, p_d) + P(reject) * residual.
Distribution per_token_output_distribution(const Distribution& p_target,
                                           const Distribution& p_draft);

// Samples up to gamma tokens from the adjusted draft. Stops early after
// proposing EOS.
DraftBlock propose_block(const SequenceModel& draft, std::span<const TokenId> context, int gamma,
                         const GenerationParams& params, Rng& rng);

// Verifies a block. `prompt_len` splits block.base_context into the prompt
// and the generated part. Draws one coin per proposed position up front,
// then exactly one more uniform for the replacement or bonus token.
VerifyOutcome verify_block(const SequenceModel& target, const DraftBlock& block,
                           const AcceptancePolicy& policy, const GenerationParams& params,
                           Rng& rng, std::size_t prompt_len = 0);

// Same, with caller-supplied coins (one per proposed token). Used to replay
// a block under several policies with identical randomness.
VerifyOutcome verify_block_with_coins(const SequenceModel& target, const DraftBlock& block,
                                      const AcceptancePolicy& policy,
                                      const GenerationParams& params,
                                      std::span<const double> coins, Rng& rng,
                                      std::size_t prompt_len = 0);

struct AcceptanceStats {
  double tau = 0.0;  // mean accepted length per block
  double eta = 0.0;  // accepted / proposed draft tokens
};

// Throws EmptyStatsError for an empty input.
AcceptanceStats acceptance_stats(std::span<const VerifyOutcome> outcomes);

struct DecodeResult {
  TokenSeq tokens;  // generated output, ending in EOS unless capped by max_len
  std::vector<VerifyOutcome> blocks;
  // Proposed draft tokens per block, before verification.
  std::vector<DraftBlock> proposals;
};

class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual DecodeResult generate(std::span<const TokenId> prompt, Rng& rng) const = 0;
};

// Plain ancestral sampling from one model (target-only or draft-only).
class AutoregressiveDecoder final : public Decoder {
 public:
  AutoregressiveDecoder(std::shared_ptr<const SequenceModel> model, GenerationParams params);
  DecodeResult generate(std::span<const TokenId> prompt, Rng& rng) const override;

 private:
  std::shared_ptr<const SequenceModel> model_;
  GenerationParams params_;
};

// Draft-then-verify loop. Blocks near max_len are truncated to the remaining
// budget; output stops at the first EOS.
class SpeculativeDecoder final : public Decoder {
 public:
  SpeculativeDecoder(std::shared_ptr<const SequenceModel> target,
                     std::shared_ptr<const SequenceModel> draft,
                     std::shared_ptr<const AcceptancePolicy> policy, int gamma,
                     GenerationParams params, bool keep_proposals = false);
  DecodeResult generate(std::span<const TokenId> prompt, Rng& rng) const override;

  int gamma() const { return gamma_; }

 private:
  std::shared_ptr<const SequenceModel> target_;
  std::shared_ptr<const SequenceModel> draft_;
  std::shared_ptr<const AcceptancePolicy> policy_;
  int gamma_;
  GenerationParams params_;
  bool keep_proposals_;
};

}  // namespace pad
