// SPDX-License-Identifier: Apache-2.0
//
// Pivot-aware acceptance: SD acceptances stand; SD rejections are overridden
// when the pivot scorer says "non-pivot" (score < sigma) and the target
// probability clears the floor.

#pragma once

#include <cstdint>
#include <memory>

#include "pad/features.h"
#include "pad/sd_verify.h"
#include "pad/utility.h"

namespace pad {

inline constexpr double kDefaultProbFloor = 1e-4;

struct GateConfig {
  // Override threshold. 0 disables overrides; 1 overrides every score < 1.
  double sigma = 0.7;
  double prob_floor = kDefaultProbFloor;

  void validate() const;
};

// Higher score means more likely a pivot.
class PivotScorer {
 public:
  virtual ~PivotScorer() = default;
  virtual double score(const PositionInput& position, const FeatureVector& features) const = 0;
};

struct GateDecision {
  Decision decision = Decision::kAccept;
  DecisionSource source = DecisionSource::kSdAccept;
};

GateDecision pad_decide(Decision sd_decision, double score, double p_target_tok,
                        const GateConfig& config);

class PadPolicy final : public AcceptancePolicy {
 public:
  PadPolicy(std::shared_ptr<const PivotScorer> scorer, GateConfig config);

  // Scores only positions standard SD rejects. A scorer or feature failure
  // counts as score 1 (reject) and is logged.
  PolicyDecision decide(const PositionInput& in) const override;

  const GateConfig& config() const { return config_; }

 private:
  std::shared_ptr<const PivotScorer> scorer_;
  GateConfig config_;
};

std::shared_ptr<const AcceptancePolicy> pad_policy(std::shared_ptr<const PivotScorer> scorer,
                                                   GateConfig config);

// Fixed score for every position.
class ConstantScorer final : public PivotScorer {
 public:
  explicit ConstantScorer(double value);
  double score(const PositionInput&, const FeatureVector&) const override { return value_; }

 private:
  double value_;
};

// Ground-truth scorer: 1 for pivots under the oracle, 0 otherwise. Monte
// Carlo estimates use a stream derived from (seed, position contents), so
// scoring is a pure function of its input.
class OracleScorer final : public PivotScorer {
 public:
  OracleScorer(UtilityFn utility, PivotOracleConfig config, std::uint64_t seed = 0);
  double score(const PositionInput& position, const FeatureVector& features) const override;

 private:
  UtilityFn utility_;
  PivotOracleConfig config_;
  std::uint64_t seed_;
};

}  // namespace pad
