// SPDX-License-Identifier: Apache-2.0

#include "pad/pivot_gate.h"

#include <cmath>
#include <exception>
#include <iostream>

#include "pad/errors.h"

namespace pad {

void GateConfig::validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must be in [0, 1]");
  if (!(prob_floor >= 0.0)) throw ConfigError("prob_floor must be >= 0");
}

GateDecision pad_decide(Decision sd_decision, double score, double p_target_tok,
                        const GateConfig& config) {
  if (sd_decision == Decision::kAccept) return {Decision::kAccept, DecisionSource::kSdAccept};
  if (p_target_tok < config.prob_floor) return {Decision::kReject, DecisionSource::kSdReject};
  if (score < config.sigma) return {Decision::kAccept, DecisionSource::kPadOverride};
  return {Decision::kReject, DecisionSource::kSdReject};
}

PadPolicy::PadPolicy(std::shared_ptr<const PivotScorer> scorer, GateConfig config)
    : scorer_(std::move(scorer)), config_(config) {
  if (!scorer_) throw ConfigError("PAD policy needs a pivot scorer");
  config_.validate();
}

PolicyDecision PadPolicy::decide(const PositionInput& in) const {
  const Decision sd = in.coin < accept_probability(in.p_target, in.p_draft) ? Decision::kAccept
                                                                             : Decision::kReject;
  if (sd == Decision::kAccept) return {Decision::kAccept, DecisionSource::kSdAccept, false};

  double score = 1.0;
  try {
    if (in.target == nullptr || in.target_dist == nullptr) {
      throw ConfigError("position has no target model attached");
    }
    const TokenSeq context = concat(in.prompt, in.generated);
    const FeatureVector f =
        features_from_distribution(*in.target, context, *in.target_dist, in.candidate);
    score = scorer_->score(in, f);
    if (!(score >= 0.0 && score <= 1.0)) throw ConfigError("pivot score outside [0, 1]");
  } catch (const std::exception& e) {
    std::cerr << "warning: pivot scoring failed (" << e.what() << "); rejecting\n";
    score = 1.0;
  }
  const GateDecision g = pad_decide(sd, score, in.p_target, config_);
  return {g.decision, g.source, true};
}

std::shared_ptr<const AcceptancePolicy> pad_policy(std::shared_ptr<const PivotScorer> scorer,
                                                   GateConfig config) {
  return std::make_shared<const PadPolicy>(std::move(scorer), config);
}

ConstantScorer::ConstantScorer(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("score must be in [0, 1]");
}

OracleScorer::OracleScorer(UtilityFn utility, PivotOracleConfig config, std::uint64_t seed)
    : utility_(std::move(utility)), config_(config), seed_(seed) {
  config_.validate();
}

double OracleScorer::score(const PositionInput& position, const FeatureVector&) const {
  std::uint64_t h = derive_seed(seed_, {position.prompt.size(), position.generated.size(),
                                        static_cast<std::uint64_t>(position.candidate)});
  for (TokenId t : position.prompt) h = mix64(h ^ static_cast<std::uint64_t>(t));
  for (TokenId t : position.generated) h = mix64(h ^ (static_cast<std::uint64_t>(t) + 977));
  Rng rng(h);
  return pivot_verdict(*position.target, position.prompt, position.generated, position.candidate,
                       config_, utility_, rng)
                 .pivot
             ? 1.0
             : 0.0;
}

}  // namespace pad
