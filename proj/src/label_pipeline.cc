// SPDX-License-Identifier: Apache-2.0

#include "pad/label_pipeline.h"

#include <algorithm>
#include <exception>
#include <iostream>

#include "pad/errors.h"
#include "pad/parallel.h"
#include "pad/sd_verify.h"

namespace pad {

std::string to_string(PivotLabel label) {
  return label == PivotLabel::kPivot ? "pivot" : "non-pivot";
}

PivotLabel pivot_label_from_string(const std::string& name) {
  if (name == "pivot") return PivotLabel::kPivot;
  if (name == "non-pivot") return PivotLabel::kNonPivot;
  throw SchemaError("unknown label '" + name + "'");
}

void LabelConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (n_rollouts < 1) throw ConfigError("rollout count must be >= 1");
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (sample_cap && *sample_cap < 0) throw ConfigError("sample cap must be >= 0");
  if (rollout_budget && *rollout_budget < 0) throw ConfigError("rollout budget must be >= 0");
  params.validate();
}

ChecksumRepairJudge::ChecksumRepairJudge(int vocab_size) : vocab_size_(vocab_size) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
}

bool ChecksumRepairJudge::is_sound(std::span<const TokenId> context,
                                   std::span<const TokenId> output) const {
  const int residue = checksum_residue(context, vocab_size_);
  const auto body = strip_eos(output);
  int running = 0;
  for (std::size_t i = 0; i + 1 < body.size(); ++i) {
    const int a = body[i], b = body[i + 1];
    if (running == residue && a % vocab_size_ != 0 && (a + b) % vocab_size_ == 0) return false;
    running = (running + a) % vocab_size_;
  }
  return true;
}

PivotLabel label_rule(const RolloutEstimate& u_base, const RolloutEstimate& u_cand, double alpha) {
  return u_cand.mean < alpha * u_base.mean ? PivotLabel::kPivot : PivotLabel::kNonPivot;
}

std::optional<ScoredRollout> select_representative(std::span<const ScoredRollout> successful) {
  if (successful.empty()) return std::nullopt;
  std::vector<const ScoredRollout*> sorted;
  for (const auto& r : successful) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->output.size() < b->output.size();
  });
  return *sorted[(sorted.size() - 1) / 2];
}

JudgedLabel judge_check(PivotLabel label, std::span<const ScoredRollout> rollouts,
                        std::span<const TokenId> context, const Judge& judge) {
  if (label == PivotLabel::kPivot) return {label, false};
  std::vector<ScoredRollout> successful;
  for (const auto& r : rollouts) {
    if (r.utility == 1) successful.push_back(r);
  }
  const auto rep = select_representative(successful);
  if (!rep) return {label, false};
  try {
    if (!judge.is_sound(context, rep->output)) return {PivotLabel::kPivot, true};
  } catch (const std::exception& e) {
    std::cerr << "warning: judge failed (" << e.what() << "); label unchanged\n";
  }
  return {label, false};
}

namespace {

HarvestResult harvest_context(int context_id, std::span<const TokenId> prompt,
                              const SequenceModel& target, const SequenceModel& draft,
                              const UtilityFn& u, const LabelConfig& cfg, const Judge& judge) {
  HarvestResult out;
  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(context_id)}));
  TokenSeq prefix;
  const auto max_len = static_cast<std::size_t>(cfg.params.max_len);
  int labeled = 0;
  for (int step = 0; step < cfg.max_steps; ++step) {
    if ((!prefix.empty() && prefix.back() == kEos) || prefix.size() >= max_len) break;
    const TokenSeq context = concat(prompt, prefix);
    const Distribution p_d = adjust_distribution(draft.next_distribution(context), cfg.params);
    const Distribution p_t = adjust_distribution(target.next_distribution(context), cfg.params);
    const TokenId cand = sample_token(p_d, rng);
    const double coin = rng.uniform();
    if (coin < accept_probability(p_t[cand], p_d[cand])) {
      ++out.sd_accepts;
      prefix.push_back(cand);
      continue;
    }
    ++out.sd_rejections;

    if (cfg.sample_cap && labeled >= *cfg.sample_cap) {
      ++out.unlabeled_rejections;
      prefix.push_back(sample_token(residual_distribution(p_t, p_d), rng));
      continue;
    }
    if (cfg.rollout_budget &&
        static_cast<long>(out.rollouts) + 2L * cfg.n_rollouts > *cfg.rollout_budget) {
      out.truncated = true;
      break;
    }

    const TokenSeq with_cand = concat(prefix, std::span<const TokenId>(&cand, 1));
    const auto base_rollouts =
        sample_rollouts(target, prompt, prefix, u, cfg.n_rollouts, cfg.params, rng);
    const auto cand_rollouts =
        sample_rollouts(target, prompt, with_cand, u, cfg.n_rollouts, cfg.params, rng);
    out.rollouts += base_rollouts.size() + cand_rollouts.size();
    RolloutEstimate base = summarize(base_rollouts);
    RolloutEstimate cand_est = summarize(cand_rollouts);
    if (cfg.exact_when_enumerable &&
        is_enumerable(target.vocab_size(), prefix.size(), cfg.params)) {
      base = {exact_expected_utility(target, prompt, prefix, u, cfg.params), 0, 0, true};
      cand_est = {exact_expected_utility(target, prompt, with_cand, u, cfg.params), 0, 0, true};
    }

    const JudgedLabel judged =
        judge_check(label_rule(base, cand_est, cfg.alpha), cand_rollouts, prompt, judge);

    LabeledSample s;
    s.context_id = context_id;
    s.prefix = prefix;
    s.candidate = cand;
    s.label = judged.label;
    s.u_base_hat = base.mean;
    s.u_cand_hat = cand_est.mean;
    s.features = features_from_distribution(target, context, p_t, cand);
    s.judge_flipped = judged.judge_flipped;
    out.judge_flips += judged.judge_flipped;
    out.samples.push_back(std::move(s));
    ++labeled;

    if (judged.label == PivotLabel::kNonPivot) {
      prefix.push_back(cand);
    } else {
      prefix.push_back(sample_token(residual_distribution(p_t, p_d), rng));
    }
  }
  return out;
}

}  // namespace

HarvestResult harvest_and_label(std::span<const TokenSeq> contexts, const SequenceModel& target,
                                const SequenceModel& draft, const UtilityFn& u,
                                const LabelConfig& cfg, const Judge& judge) {
  cfg.validate();
  if (target.vocab_size() != draft.vocab_size()) {
    throw ConfigError("target and draft vocabularies differ");
  }
  std::vector<HarvestResult> per_context(contexts.size());
  parallel_for(contexts.size(), cfg.jobs, [&](std::size_t i) {
    per_context[i] =
        harvest_context(static_cast<int>(i), contexts[i], target, draft, u, cfg, judge);
  });

  HarvestResult all;
  for (auto& r : per_context) {
    all.samples.insert(all.samples.end(), std::make_move_iterator(r.samples.begin()),
                       std::make_move_iterator(r.samples.end()));
    all.sd_rejections += r.sd_rejections;
    all.sd_accepts += r.sd_accepts;
    all.unlabeled_rejections += r.unlabeled_rejections;
    all.judge_flips += r.judge_flips;
    all.rollouts += r.rollouts;
    all.truncated = all.truncated || r.truncated;
  }
  return all;
}

}  // namespace pad
