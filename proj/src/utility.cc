// SPDX-License-Identifier: Apache-2.0

#include "pad/utility.h"

#include <algorithm>
#include <cmath>

#include "pad/errors.h"
#include "pad/parallel.h"

namespace pad {

int utility(std::span<const TokenId> output, std::span<const TokenId> context,
            const UtilityFn& u) {
  if (!u.eval) throw ConfigError("utility has no evaluation function");
  return u.eval(output, context) >= u.theta_eval ? 1 : 0;
}

std::span<const TokenId> strip_eos(std::span<const TokenId> output) {
  const auto it = std::find(output.begin(), output.end(), kEos);
  return output.first(static_cast<std::size_t>(it - output.begin()));
}

UtilityFn substring_utility(TokenSeq pattern) {
  if (pattern.empty()) throw ConfigError("empty substring pattern");
  UtilityFn u;
  u.name = "substring";
  u.eval = [pattern = std::move(pattern)](std::span<const TokenId> output,
                                          std::span<const TokenId>) {
    const auto body = strip_eos(output);
    return std::search(body.begin(), body.end(), pattern.begin(), pattern.end()) != body.end()
               ? 1.0
               : 0.0;
  };
  return u;
}

int checksum_residue(std::span<const TokenId> context, int vocab_size) {
  long long sum = 0;
  for (TokenId t : context) sum += t;
  return static_cast<int>(sum % vocab_size);
}

UtilityFn checksum_utility(int vocab_size) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
  UtilityFn u;
  u.name = "checksum";
  u.eval = [vocab_size](std::span<const TokenId> output, std::span<const TokenId> context) {
    long long sum = 0;
    for (TokenId t : strip_eos(output)) sum += t;
    return static_cast<int>(sum % vocab_size) == checksum_residue(context, vocab_size) ? 1.0
                                                                                        : 0.0;
  };
  return u;
}

UtilityFn make_utility(const UtilitySpec& spec, int vocab_size) {
  switch (spec.kind) {
    case UtilityKind::kSubstring:
      check_tokens(spec.pattern, vocab_size);
      return substring_utility(spec.pattern);
    case UtilityKind::kChecksum:
      return checksum_utility(vocab_size);
  }
  throw ConfigError("unknown utility kind");
}

double RolloutEstimate::standard_error() const {
  if (exact || n <= 0) return 0.0;
  return std::sqrt(mean * (1.0 - mean) / n);
}

std::vector<ScoredRollout> sample_rollouts(const SequenceModel& model,
                                           std::span<const TokenId> prompt,
                                           std::span<const TokenId> prefix, const UtilityFn& u,
                                           int n, const GenerationParams& params, Rng& rng) {
  if (n < 1) throw ConfigError("rollout count must be >= 1");
  std::vector<ScoredRollout> out;
  out.reserve(static_cast<std::size_t>(n));
  const bool complete = (!prefix.empty() && prefix.back() == kEos) ||
                        prefix.size() >= static_cast<std::size_t>(params.max_len);
  GenerationParams rest = params;
  rest.max_len = params.max_len - static_cast<int>(prefix.size());
  const TokenSeq context = concat(prompt, prefix);
  for (int i = 0; i < n; ++i) {
    ScoredRollout r;
    r.output.assign(prefix.begin(), prefix.end());
    if (!complete) {
      const TokenSeq suffix = rollout(model, context, rest, rng);
      r.output.insert(r.output.end(), suffix.begin(), suffix.end());
    }
    r.utility = utility(r.output, prompt, u);
    out.push_back(std::move(r));
  }
  return out;
}

RolloutEstimate summarize(std::span<const ScoredRollout> rollouts) {
  if (rollouts.empty()) throw EmptyStatsError("no rollouts");
  RolloutEstimate e;
  e.n = static_cast<int>(rollouts.size());
  for (const auto& r : rollouts) e.successes += r.utility;
  e.mean = static_cast<double>(e.successes) / e.n;
  return e;
}

RolloutEstimate expected_utility(const SequenceModel& model, std::span<const TokenId> prompt,
                                 std::span<const TokenId> prefix, const UtilityFn& u, int n,
                                 const GenerationParams& params, Rng& rng) {
  return summarize(sample_rollouts(model, prompt, prefix, u, n, params, rng));
}

bool is_enumerable(int vocab_size, std::size_t prefix_len, const GenerationParams& params) {
  const auto max_len = static_cast<std::size_t>(params.max_len);
  if (prefix_len >= max_len) return true;
  const double h = static_cast<double>(max_len - prefix_len);
  return h * std::log(static_cast<double>(vocab_size)) <= std::log(kMaxEnumeratedOutcomes) + 1e-12;
}

namespace {

double enumerate(const SequenceModel& model, std::span<const TokenId> prompt, TokenSeq& output,
                 const UtilityFn& u, const GenerationParams& params) {
  if ((!output.empty() && output.back() == kEos) ||
      output.size() >= static_cast<std::size_t>(params.max_len)) {
    return utility(output, prompt, u);
  }
  const Distribution dist =
      adjust_distribution(model.next_distribution(concat(prompt, output)), params);
  double total = 0.0;
  for (TokenId t = 0; t < dist.size(); ++t) {
    if (dist[t] <= 0.0) continue;
    output.push_back(t);
    total += dist[t] * enumerate(model, prompt, output, u, params);
    output.pop_back();
  }
  return total;
}

}  // namespace

double exact_expected_utility(const SequenceModel& model, std::span<const TokenId> prompt,
                              std::span<const TokenId> prefix, const UtilityFn& u,
                              const GenerationParams& params) {
  params.validate();
  if (!is_enumerable(model.vocab_size(), prefix.size(), params)) {
    throw ConfigError("outcome space too large for exact enumeration");
  }
  TokenSeq output(prefix.begin(), prefix.end());
  return enumerate(model, prompt, output, u, params);
}

void PivotOracleConfig::validate() const {
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  params.validate();
}

PivotVerdict pivot_verdict(const SequenceModel& target, std::span<const TokenId> prompt,
                           std::span<const TokenId> prefix, TokenId candidate,
                           const PivotOracleConfig& cfg, const UtilityFn& u, Rng& rng) {
  cfg.validate();
  check_tokens(std::span<const TokenId>(&candidate, 1), target.vocab_size());
  const TokenSeq with_cand = concat(prefix, std::span<const TokenId>(&candidate, 1));
  PivotVerdict v;
  if (cfg.exact_when_enumerable && is_enumerable(target.vocab_size(), prefix.size(), cfg.params)) {
    v.exact = true;
    v.u_base = exact_expected_utility(target, prompt, prefix, u, cfg.params);
    v.u_cand = exact_expected_utility(target, prompt, with_cand, u, cfg.params);
  } else {
    v.u_base = expected_utility(target, prompt, prefix, u, cfg.n_rollouts, cfg.params, rng).mean;
    v.u_cand =
        expected_utility(target, prompt, with_cand, u, cfg.n_rollouts, cfg.params, rng).mean;
  }
  v.pivot = v.u_cand <= v.u_base - cfg.epsilon;
  return v;
}

bool is_pivot_oracle(const SequenceModel& target, std::span<const TokenId> prompt,
                     std::span<const TokenId> prefix, TokenId candidate,
                     const PivotOracleConfig& cfg, const UtilityFn& u, Rng& rng) {
  return pivot_verdict(target, prompt, prefix, candidate, cfg, u, rng).pivot;
}

PreservationReport check_utility_preservation(const Decoder& a, const Decoder& b,
                                              std::span<const TokenSeq> contexts,
                                              const UtilityFn& u, int n, double epsilon,
                                              std::uint64_t seed, int jobs, double z) {
  if (contexts.empty()) throw EmptyStatsError("no contexts");
  if (n < 1) throw ConfigError("rollout count must be >= 1");
  std::vector<double> ua(contexts.size()), ub(contexts.size());
  parallel_for(contexts.size(), jobs, [&](std::size_t i) {
    const std::uint64_t stream = derive_seed(seed, {i});
    Rng ra(stream), rb(stream);
    double sa = 0.0, sb = 0.0;
    for (int k = 0; k < n; ++k) {
      sa += utility(a.generate(contexts[i], ra).tokens, contexts[i], u);
      sb += utility(b.generate(contexts[i], rb).tokens, contexts[i], u);
    }
    ua[i] = sa / n;
    ub[i] = sb / n;
  });

  PreservationReport r;
  r.contexts = contexts.size();
  r.epsilon = epsilon;
  const double m = static_cast<double>(contexts.size());
  double mean_d = 0.0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    r.utility_a += ua[i] / m;
    r.utility_b += ub[i] / m;
    mean_d += (ua[i] - ub[i]) / m;
  }
  double var = 0.0;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const double d = ua[i] - ub[i] - mean_d;
    var += d * d;
  }
  var = contexts.size() > 1 ? var / (m - 1.0) : 0.0;
  r.gap = mean_d;
  r.gap_se = std::sqrt(var / m);
  r.ci_low = r.gap - z * r.gap_se;
  r.ci_high = r.gap + z * r.gap_se;
  r.preserved = r.ci_high >= -epsilon;
  return r;
}

}  // namespace pad
