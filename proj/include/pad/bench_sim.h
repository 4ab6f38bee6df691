// SPDX-License-Identifier: Apache-2.0
//
// Acceptance and latency accounting. Costs are abstract units: a draft
// block costs block_len * t_draft + t_target, a target-only token costs
// t_target and a draft-only token t_draft. Measured wall-clock is reported
// separately and never mixed into simulated cost.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/pivot_gate.h"
#include "pad/sd_verify.h"
#include "pad/utility.h"

namespace pad {

struct TimingProfile {
  double t_draft = 1.0;
  double t_target = 3.94;

  void validate() const;
};

// (eta * gamma + 1) * t_target / (gamma * t_draft + t_target)
double expected_speedup(double eta, int gamma, const TimingProfile& profile);

enum class DecoderKind { kTarget, kSd, kPad, kDraft };

struct DecoderSpec {
  DecoderKind kind = DecoderKind::kSd;
  double sigma = 0.0;  // PAD only

  std::string id() const;
};

std::string to_string(DecoderKind kind);
DecoderKind decoder_kind_from_string(const std::string& name);

struct RunSetup {
  std::shared_ptr<const SequenceModel> target;
  std::shared_ptr<const SequenceModel> draft;
  UtilityFn utility;
  GenerationParams params;
  int gamma = 10;
  GateConfig gate;  // sigma is taken from DecoderSpec
  std::shared_ptr<const PivotScorer> scorer;
  TimingProfile profile;
  // Cost charged per pivot-scorer query.
  double classifier_cost = 0.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool keep_proposals = false;
};

struct RunReport {
  std::string decoder_id;
  DecoderKind kind = DecoderKind::kTarget;
  double sigma = 0.0;
  std::optional<double> eta;
  std::optional<double> tau;
  double utility_mean = 0.0;
  double utility_se = 0.0;
  double utility_ci = 0.0;  // 95% half-width
  double simulated_cost = 0.0;
  double simulated_speedup = 0.0;
  double predicted_speedup = 0.0;
  double wall_clock_ms = 0.0;
  std::size_t contexts = 0;
  std::size_t tokens = 0;
  std::size_t blocks = 0;
  std::size_t proposed = 0;
  std::size_t accepted = 0;
  std::size_t rejections = 0;  // replacement tokens emitted
  std::size_t overrides = 0;
  std::size_t score_queries = 0;
};

struct RunResult {
  RunReport report;
  std::vector<DecodeResult> decodes;  // one per context
};

// Decodes every context with a stream derived from (seed, context index), so
// different decoders on the same setup run on paired seeds.
RunResult simulate_run(const DecoderSpec& decoder, const RunSetup& setup,
                       std::span<const TokenSeq> contexts);

struct ComparisonRow {
  RunReport report;
  double delta_utility = 0.0;  // relative to the first row
  double delta_speedup = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::string table;               // aligned text
  std::vector<std::string> lines;  // one JSON object per row
};

// Rows ordered target, sd, pad (sigma descending), draft. Throws
// ConfigError for fewer than two reports.
Comparison compare_report(std::span<const RunReport> reports);

// One verified block captured for replay under other policies.
struct ReplayBlock {
  DraftBlock block;
  std::vector<double> coins;
  std::size_t prompt_len = 0;
};

// Requires decodes produced with keep_proposals.
std::vector<ReplayBlock> collect_replay_blocks(std::span<const DecodeResult> decodes);

// Re-verifies each block with its recorded coins.
std::vector<VerifyOutcome> replay_blocks(const SequenceModel& target,
                                         std::span<const ReplayBlock> blocks,
                                         const AcceptancePolicy& policy,
                                         const GenerationParams& params);

}  // namespace pad
