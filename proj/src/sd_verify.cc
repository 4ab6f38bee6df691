// SPDX-License-Identifier: Apache-2.0

#include "pad/sd_verify.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "pad/errors.h"

namespace pad {

std::string to_string(Decision d) { return d == Decision::kAccept ? "accept" : "reject"; }

std::string to_string(DecisionSource s) {
  switch (s) {
    case DecisionSource::kSdAccept:
      return "sd-accept";
    case DecisionSource::kSdReject:
      return "sd-reject";
    case DecisionSource::kPadOverride:
      return "pad-override";
  }
  return "unknown";
}

double accept_probability(double p_target_tok, double p_draft_tok) {
  if (!(p_draft_tok > 0.0)) {
    throw std::invalid_argument("proposed token must have positive draft probability");
  }
  if (p_target_tok < 0.0) throw std::invalid_argument("negative target probability");
  return std::min(1.0, p_target_tok / p_draft_tok);
}

PolicyDecision StandardPolicy::decide(const PositionInput& in) const {
  if (in.coin < accept_probability(in.p_target, in.p_draft)) {
    return {Decision::kAccept, DecisionSource::kSdAccept, false};
  }
  return {Decision::kReject, DecisionSource::kSdReject, false};
}

Distribution residual_distribution(const Distribution& p_target, const Distribution& p_draft) {
  if (p_target.size() != p_draft.size()) throw ConfigError("vocabulary size mismatch");
  std::vector<double> w(static_cast<std::size_t>(p_target.size()));
  double mass = 0.0;
  for (TokenId i = 0; i < p_target.size(); ++i) {
    w[static_cast<std::size_t>(i)] = std::max(0.0, p_target[i] - p_draft[i]);
    mass += w[static_cast<std::size_t>(i)];
  }
  if (!(mass > 0.0)) throw DegenerateResidualError("p_target equals p_draft; no residual mass");
  return Distribution::normalized(std::move(w));
}

Distribution per_token_output_distribution(const Distribution& p_target,
                                           const Distribution& p_draft) {
  if (p_target.size() != p_draft.size()) throw ConfigError("vocabulary size mismatch");
  const auto n = static_cast<std::size_t>(p_target.size());
  std::vector<double> out(n);
  double reject_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<TokenId>(i);
    out[i] = std::min(p_target[t], p_draft[t]);
    reject_mass += std::max(0.0, p_draft[t] - p_target[t]);
  }
  if (reject_mass > 0.0) {
    const Distribution residual = residual_distribution(p_target, p_draft);
    for (std::size_t i = 0; i < n; ++i) out[i] += reject_mass * residual[static_cast<TokenId>(i)];
  }
  return Distribution::normalized(std::move(out));
}

DraftBlock propose_block(const SequenceModel& draft, std::span<const TokenId> context, int gamma,
                         const GenerationParams& params, Rng& rng) {
  if (gamma < 1) throw ConfigError("gamma must be >= 1");
  DraftBlock block;
  block.base_context.assign(context.begin(), context.end());
  TokenSeq running = block.base_context;
  for (int i = 0; i < gamma; ++i) {
    Distribution dist = adjust_distribution(draft.next_distribution(running), params);
    const TokenId t = sample_token(dist, rng);
    block.tokens.push_back(t);
    block.draft_probs.push_back(dist[t]);
    block.draft_dists.push_back(std::move(dist));
    running.push_back(t);
    if (t == kEos) break;
  }
  return block;
}

VerifyOutcome verify_block(const SequenceModel& target, const DraftBlock& block,
                           const AcceptancePolicy& policy, const GenerationParams& params,
                           Rng& rng, std::size_t prompt_len) {
  std::vector<double> coins(block.size());
  for (double& c : coins) c = rng.uniform();
  return verify_block_with_coins(target, block, policy, params, coins, rng, prompt_len);
}

VerifyOutcome verify_block_with_coins(const SequenceModel& target, const DraftBlock& block,
                                      const AcceptancePolicy& policy,
                                      const GenerationParams& params,
                                      std::span<const double> coins, Rng& rng,
                                      std::size_t prompt_len) {
  if (block.size() == 0) throw ConfigError("empty draft block");
  if (coins.size() != block.size()) throw ConfigError("need one coin per proposed token");
  if (prompt_len > block.base_context.size()) throw ConfigError("prompt longer than context");

  VerifyOutcome out;
  out.block_len = static_cast<int>(block.size());
  out.coins.assign(coins.begin(), coins.end());

  // Conditioning tokens are the draft tokens themselves, so every target
  // distribution below is available from a single (conceptually parallel) pass.
  TokenSeq running = block.base_context;
  const std::span<const TokenId> prompt(block.base_context.data(), prompt_len);
  for (std::size_t i = 0; i < block.size(); ++i) {
    const Distribution p_t = adjust_distribution(target.next_distribution(running), params);
    const TokenId tok = block.tokens[i];

    PositionInput in;
    in.prompt = prompt;
    in.generated = std::span<const TokenId>(running).subspan(prompt_len);
    in.candidate = tok;
    in.p_target = p_t[tok];
    in.p_draft = block.draft_probs[i];
    in.coin = coins[i];
    in.target_dist = &p_t;
    in.target = &target;
    const PolicyDecision d = policy.decide(in);
    if (d.scored) ++out.score_queries;

    out.records.push_back({static_cast<int>(i), tok, in.p_target, in.p_draft, coins[i],
                           d.decision, d.source});

    if (d.decision == Decision::kReject) {
      // A rejection implies p_target < p_draft for this token, so the
      // residual has positive mass.
      const Distribution& p_d = block.draft_dists[i];
      assert(in.p_target < in.p_draft);
      out.emitted.insert(out.emitted.end(), block.tokens.begin(),
                         block.tokens.begin() + static_cast<std::ptrdiff_t>(i));
      out.emitted.push_back(sample_token(residual_distribution(p_t, p_d), rng));
      out.accepted_len = static_cast<int>(i);
      return out;
    }
    running.push_back(tok);
  }

  out.accepted_len = static_cast<int>(block.size());
  out.emitted = block.tokens;
  if (block.tokens.back() != kEos) {
    out.emitted.push_back(
        sample_token(adjust_distribution(target.next_distribution(running), params), rng));
    out.got_bonus = true;
  }
  return out;
}

AcceptanceStats acceptance_stats(std::span<const VerifyOutcome> outcomes) {
  if (outcomes.empty()) throw EmptyStatsError("no verify outcomes");
  double accepted = 0.0;
  double proposed = 0.0;
  for (const auto& o : outcomes) {
    accepted += o.accepted_len;
    proposed += o.block_len;
  }
  return {accepted / static_cast<double>(outcomes.size()), accepted / proposed};
}

AutoregressiveDecoder::AutoregressiveDecoder(std::shared_ptr<const SequenceModel> model,
                                             GenerationParams params)
    : model_(std::move(model)), params_(params) {
  params_.validate();
}

DecodeResult AutoregressiveDecoder::generate(std::span<const TokenId> prompt, Rng& rng) const {
  return {rollout(*model_, prompt, params_, rng), {}, {}};
}

SpeculativeDecoder::SpeculativeDecoder(std::shared_ptr<const SequenceModel> target,
                                       std::shared_ptr<const SequenceModel> draft,
                                       std::shared_ptr<const AcceptancePolicy> policy, int gamma,
                                       GenerationParams params, bool keep_proposals)
    : target_(std::move(target)),
      draft_(std::move(draft)),
      policy_(std::move(policy)),
      gamma_(gamma),
      params_(params),
      keep_proposals_(keep_proposals) {
  if (gamma_ < 1) throw ConfigError("gamma must be >= 1");
  if (target_->vocab_size() != draft_->vocab_size()) {
    throw ConfigError("target and draft vocabularies differ");
  }
  params_.validate();
}

DecodeResult SpeculativeDecoder::generate(std::span<const TokenId> prompt, Rng& rng) const {
  DecodeResult result;
  TokenSeq context(prompt.begin(), prompt.end());
  const auto max_len = static_cast<std::size_t>(params_.max_len);
  while (result.tokens.size() < max_len) {
    const std::size_t remaining = max_len - result.tokens.size();
    const int g = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(gamma_), remaining));
    DraftBlock block = propose_block(*draft_, context, g, params_, rng);
    VerifyOutcome outcome = verify_block(*target_, block, *policy_, params_, rng, prompt.size());

    bool done = false;
    for (TokenId t : outcome.emitted) {
      if (result.tokens.size() >= max_len) break;
      result.tokens.push_back(t);
      context.push_back(t);
      if (t == kEos) {
        done = true;
        break;
      }
    }
    result.blocks.push_back(std::move(outcome));
    if (keep_proposals_) result.proposals.push_back(std::move(block));
    if (done) break;
  }
  return result;
}

}  // namespace pad
