// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "pad/lm_core.h"

namespace pad {

// Target-side features available at verification time.
struct FeatureVector {
  std::vector<double> h;  // hidden-state analog, dimension d_h
  double entropy = 0.0;   // nats, of the adjusted target distribution
  double p_cand = 0.0;    // adjusted target probability of the candidate

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

FeatureVector extract_features(const SequenceModel& target, std::span<const TokenId> context,
                               TokenId candidate, const GenerationParams& params);

// Same, reusing an already adjusted target distribution for `context`.
FeatureVector features_from_distribution(const SequenceModel& target,
                                         std::span<const TokenId> context,
                                         const Distribution& adjusted_target, TokenId candidate);

}  // namespace pad
