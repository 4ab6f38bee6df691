// SPDX-License-Identifier: Apache-2.0

#include "pad/bench_sim.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "pad/errors.h"
#include "pad/parallel.h"
#include "json.hpp"

namespace pad {

void TimingProfile::validate() const {
  if (!(t_draft > 0.0) || !(t_target > 0.0)) {
    throw ConfigError("t_draft and t_target must be positive");
  }
}

double expected_speedup(double eta, int gamma, const TimingProfile& profile) {
  profile.validate();
  if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must be in [0, 1]");
  if (gamma < 1) throw ConfigError("gamma must be >= 1");
  return (eta * gamma + 1.0) * profile.t_target / (gamma * profile.t_draft + profile.t_target);
}

std::string to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kTarget:
      return "target";
    case DecoderKind::kSd:
      return "sd";
    case DecoderKind::kPad:
      return "pad";
    case DecoderKind::kDraft:
      return "draft";
  }
  return "unknown";
}

DecoderKind decoder_kind_from_string(const std::string& name) {
  if (name == "target") return DecoderKind::kTarget;
  if (name == "sd") return DecoderKind::kSd;
  if (name == "pad") return DecoderKind::kPad;
  if (name == "draft") return DecoderKind::kDraft;
  throw ConfigError("unknown decoder '" + name + "'");
}

std::string DecoderSpec::id() const {
  if (kind != DecoderKind::kPad) return to_string(kind);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "pad(%.2f)", sigma);
  return buf;
}

RunResult simulate_run(const DecoderSpec& decoder, const RunSetup& setup,
                       std::span<const TokenSeq> contexts) {
  setup.profile.validate();
  setup.params.validate();
  if (!setup.target || !setup.draft) throw ConfigError("run needs target and draft models");
  if (contexts.empty()) throw EmptyStatsError("no contexts");

  std::unique_ptr<Decoder> dec;
  switch (decoder.kind) {
    case DecoderKind::kTarget:
      dec = std::make_unique<AutoregressiveDecoder>(setup.target, setup.params);
      break;
    case DecoderKind::kDraft:
      dec = std::make_unique<AutoregressiveDecoder>(setup.draft, setup.params);
      break;
    case DecoderKind::kSd:
      dec = std::make_unique<SpeculativeDecoder>(setup.target, setup.draft,
                                                 std::make_shared<StandardPolicy>(), setup.gamma,
                                                 setup.params, setup.keep_proposals);
      break;
    case DecoderKind::kPad: {
      if (!setup.scorer) throw ConfigError("PAD decoder needs a pivot scorer");
      GateConfig gate = setup.gate;
      gate.sigma = decoder.sigma;
      dec = std::make_unique<SpeculativeDecoder>(setup.target, setup.draft,
                                                 pad_policy(setup.scorer, gate), setup.gamma,
                                                 setup.params, setup.keep_proposals);
      break;
    }
  }

  RunResult result;
  result.decodes.resize(contexts.size());
  std::vector<int> utilities(contexts.size());
  const auto start = std::chrono::steady_clock::now();
  parallel_for(contexts.size(), setup.jobs, [&](std::size_t i) {
    Rng rng(derive_seed(setup.seed, {i}));
    result.decodes[i] = dec->generate(contexts[i], rng);
    utilities[i] = utility(result.decodes[i].tokens, contexts[i], setup.utility);
  });
  const auto stop = std::chrono::steady_clock::now();

  RunReport& r = result.report;
  r.decoder_id = decoder.id();
  r.kind = decoder.kind;
  r.sigma = decoder.kind == DecoderKind::kPad ? decoder.sigma : 0.0;
  r.contexts = contexts.size();
  r.wall_clock_ms = std::chrono::duration<double, std::milli>(stop - start).count();

  const TimingProfile& prof = setup.profile;
  double successes = 0.0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const DecodeResult& d = result.decodes[i];
    successes += utilities[i];
    r.tokens += d.tokens.size();
    for (const VerifyOutcome& o : d.blocks) {
      ++r.blocks;
      r.proposed += static_cast<std::size_t>(o.block_len);
      r.accepted += static_cast<std::size_t>(o.accepted_len);
      r.score_queries += static_cast<std::size_t>(o.score_queries);
      if (!o.got_bonus && o.accepted_len < o.block_len) ++r.rejections;
      for (const auto& rec : o.records) r.overrides += rec.source == DecisionSource::kPadOverride;
      r.simulated_cost += o.block_len * prof.t_draft + prof.t_target;
    }
  }
  const double n = static_cast<double>(contexts.size());
  r.utility_mean = successes / n;
  r.utility_se = std::sqrt(r.utility_mean * (1.0 - r.utility_mean) / n);
  r.utility_ci = 1.96 * r.utility_se;

  switch (decoder.kind) {
    case DecoderKind::kTarget:
      r.simulated_cost = static_cast<double>(r.tokens) * prof.t_target;
      r.predicted_speedup = 1.0;
      break;
    case DecoderKind::kDraft:
      r.simulated_cost = static_cast<double>(r.tokens) * prof.t_draft;
      r.predicted_speedup = prof.t_target / prof.t_draft;
      break;
    case DecoderKind::kSd:
    case DecoderKind::kPad: {
      r.simulated_cost += setup.classifier_cost * static_cast<double>(r.score_queries);
      std::vector<VerifyOutcome> all;
      for (const auto& d : result.decodes) all.insert(all.end(), d.blocks.begin(), d.blocks.end());
      const AcceptanceStats stats = acceptance_stats(all);
      r.eta = stats.eta;
      r.tau = stats.tau;
      r.predicted_speedup = expected_speedup(stats.eta, setup.gamma, prof);
      break;
    }
  }
  r.simulated_speedup =
      r.simulated_cost > 0.0 ? static_cast<double>(r.tokens) * prof.t_target / r.simulated_cost
                             : 0.0;
  return result;
}

namespace {

int kind_rank(DecoderKind k) {
  switch (k) {
    case DecoderKind::kTarget:
      return 0;
    case DecoderKind::kSd:
      return 1;
    case DecoderKind::kPad:
      return 2;
    case DecoderKind::kDraft:
      return 3;
  }
  return 4;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

Comparison compare_report(std::span<const RunReport> reports) {
  if (reports.size() < 2) throw ConfigError("comparison needs at least two reports");
  std::vector<RunReport> sorted(reports.begin(), reports.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const RunReport& a, const RunReport& b) {
    if (kind_rank(a.kind) != kind_rank(b.kind)) return kind_rank(a.kind) < kind_rank(b.kind);
    if (a.sigma != b.sigma) return a.sigma > b.sigma;
    return a.decoder_id < b.decoder_id;
  });

  Comparison c;
  const RunReport& base = sorted.front();
  std::ostringstream table;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %16s %8s %7s %9s %9s %10s\n", "decoder", "utility",
                "eta(%)", "tau", "spd.pred", "spd.sim", "d.utility");
  table << line;
  for (const RunReport& r : sorted) {
    ComparisonRow row{r, r.utility_mean - base.utility_mean,
                      r.simulated_speedup - base.simulated_speedup};
    const std::string util = fixed(r.utility_mean, 3) + " +/- " + fixed(r.utility_ci, 3);
    std::snprintf(line, sizeof(line), "%-12s %16s %8s %7s %9s %9s %+10.3f\n",
                  r.decoder_id.c_str(), util.c_str(),
                  r.eta ? fixed(100.0 * *r.eta, 1).c_str() : "-",
                  r.tau ? fixed(*r.tau, 2).c_str() : "-", fixed(r.predicted_speedup, 2).c_str(),
                  fixed(r.simulated_speedup, 2).c_str(), row.delta_utility);
    table << line;

    nlohmann::json j;
    j["decoder"] = r.decoder_id;
    j["utility"] = r.utility_mean;
    j["utility_ci"] = r.utility_ci;
    j["eta"] = r.eta ? nlohmann::json(*r.eta) : nlohmann::json(nullptr);
    j["predicted_speedup"] = r.predicted_speedup;
    j["simulated_speedup"] = r.simulated_speedup;
    j["delta_utility"] = row.delta_utility;
    j["delta_speedup"] = row.delta_speedup;
    c.lines.push_back(j.dump());
    c.rows.push_back(std::move(row));
  }
  c.table = table.str();
  return c;
}

std::vector<ReplayBlock> collect_replay_blocks(std::span<const DecodeResult> decodes) {
  std::vector<ReplayBlock> out;
  for (const DecodeResult& d : decodes) {
    if (d.proposals.size() != d.blocks.size()) {
      throw ConfigError("decode was run without keep_proposals");
    }
    for (std::size_t b = 0; b < d.blocks.size(); ++b) {
      const std::size_t generated_before =
          [&] {
            std::size_t n = 0;
            for (std::size_t k = 0; k < b; ++k) n += d.blocks[k].emitted.size();
            return n;
          }();
      const std::size_t ctx_len = d.proposals[b].base_context.size();
      out.push_back({d.proposals[b], d.blocks[b].coins,
                     ctx_len >= generated_before ? ctx_len - generated_before : 0});
    }
  }
  return out;
}

std::vector<VerifyOutcome> replay_blocks(const SequenceModel& target,
                                         std::span<const ReplayBlock> blocks,
                                         const AcceptancePolicy& policy,
                                         const GenerationParams& params) {
  std::vector<VerifyOutcome> out;
  out.reserve(blocks.size());
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    Rng rng(derive_seed(0, {i}));
    out.push_back(verify_block_with_coins(target, blocks[i].block, policy, params,
                                          blocks[i].coins, rng, blocks[i].prompt_len));
  }
  return out;
}

}  // namespace pad
