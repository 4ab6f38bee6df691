// SPDX-License-Identifier: Apache-2.0

#include "pad/features.h"

namespace pad {

FeatureVector features_from_distribution(const SequenceModel& target,
                                         std::span<const TokenId> context,
                                         const Distribution& adjusted_target, TokenId candidate) {
  check_tokens(std::span<const TokenId>(&candidate, 1), target.vocab_size());
  FeatureVector f;
  f.h = target.hidden_features(context);
  f.entropy = adjusted_target.entropy();
  f.p_cand = adjusted_target[candidate];
  return f;
}

FeatureVector extract_features(const SequenceModel& target, std::span<const TokenId> context,
                               TokenId candidate, const GenerationParams& params) {
  return features_from_distribution(
      target, context, adjust_distribution(target.next_distribution(context), params), candidate);
}

}  // namespace pad
