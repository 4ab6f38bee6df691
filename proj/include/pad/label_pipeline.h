// SPDX-License-Identifier: Apache-2.0
//
// Pivot-label data collection: harvest draft tokens standard SD would
// reject, estimate base/candidate utilities with target rollouts, label with
// the alpha rule, let a judge flip suspicious non-pivots, then continue the
// walk (non-pivot: keep the draft token; pivot: resample from the residual).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/features.h"
#include "pad/utility.h"

namespace pad {

enum class PivotLabel { kNonPivot, kPivot };

std::string to_string(PivotLabel label);
PivotLabel pivot_label_from_string(const std::string& name);

struct LabelConfig {
  double alpha = 0.8;
  int n_rollouts = 8;
  int max_steps = 32;
  GenerationParams params;
  std::uint64_t seed = 0;
  // Replace the Monte Carlo means with exact values when enumerable.
  bool exact_when_enumerable = false;
  // Optional cap on labeled samples per context; later rejections are
  // resampled without labeling.
  std::optional<int> sample_cap;
  // Optional cap on rollouts per context; hitting it ends the context and
  // marks the result truncated.
  std::optional<long> rollout_budget;
  int jobs = 1;

  void validate() const;
};

struct LabeledSample {
  int context_id = 0;
  TokenSeq prefix;  // generated tokens before the candidate (prompt excluded)
  TokenId candidate = 0;
  PivotLabel label = PivotLabel::kNonPivot;
  double u_base_hat = 0.0;
  double u_cand_hat = 0.0;
  FeatureVector features;
  bool judge_flipped = false;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

class Judge {
 public:
  virtual ~Judge() = default;
  // False flags the reasoning in `output` as unsound.
  virtual bool is_sound(std::span<const TokenId> context, std::span<const TokenId> output) const = 0;
};

class AlwaysSoundJudge final : public Judge {
 public:
  bool is_sound(std::span<const TokenId>, std::span<const TokenId>) const override { return true; }
};

// Synthetic self-correction detector for the checksum task: unsound when the
// running sum already matched the target residue, the next token broke it
// and the token after that cancelled it (a + b = 0 mod V).
class ChecksumRepairJudge final : public Judge {
 public:
  explicit ChecksumRepairJudge(int vocab_size);
  bool is_sound(std::span<const TokenId> context, std::span<const TokenId> output) const override;

 private:
  int vocab_size_;
};

// pivot iff u_cand.mean < alpha * u_base.mean (strict).
PivotLabel label_rule(const RolloutEstimate& u_base, const RolloutEstimate& u_cand, double alpha);

// Median-length element of the successful rollouts (lower median for even
// counts, stable on equal lengths); nullopt for an empty set.
std::optional<ScoredRollout> select_representative(std::span<const ScoredRollout> successful);

struct JudgedLabel {
  PivotLabel label = PivotLabel::kNonPivot;
  bool judge_flipped = false;
};

// Can only flip non-pivot to pivot. A throwing judge leaves the label as is.
JudgedLabel judge_check(PivotLabel label, std::span<const ScoredRollout> rollouts,
                        std::span<const TokenId> context, const Judge& judge);

struct HarvestResult {
  std::vector<LabeledSample> samples;
  std::size_t sd_rejections = 0;
  std::size_t sd_accepts = 0;
  std::size_t unlabeled_rejections = 0;  // rejections past sample_cap
  std::size_t judge_flips = 0;
  std::size_t rollouts = 0;
  bool truncated = false;
};

HarvestResult harvest_and_label(std::span<const TokenSeq> contexts, const SequenceModel& target,
                                const SequenceModel& draft, const UtilityFn& u,
                                const LabelConfig& cfg, const Judge& judge);

}  // namespace pad
