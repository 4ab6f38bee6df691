// SPDX-License-Identifier: Apache-2.0
//
// Independent reference computations for the tests. Written for clarity over
// speed and sharing no code paths with the library beyond its public types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pad/classifier.h"
#include "pad/lm_core.h"
#include "pad/rng.h"
#include "pad/utility.h"

namespace oracle {

inline std::vector<double> dirichlet(int n, double alpha, pad::Rng& rng) {
  std::gamma_distribution<double> g(alpha, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n));
  double s = 0.0;
  for (auto& x : v) s += (x = g(rng));
  for (auto& x : v) x /= s;
  return v;
}

inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  double tv = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) tv += std::fabs(a[i] - b[i]);
  return 0.5 * tv;
}

// Nucleus set by brute force: among all subsets whose mass reaches top_p,
// the smallest; among those the one with the largest mass.
inline std::vector<double> nucleus(const std::vector<double>& p, double top_p) {
  const std::size_t n = p.size();
  std::uint32_t best = 0;
  int best_size = 1 << 30;
  double best_mass = -1.0;
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    double mass = 0.0;
    int size = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (m >> i & 1u) {
        mass += p[i];
        ++size;
      }
    }
    if (mass + 1e-12 < top_p) continue;
    if (size < best_size || (size == best_size && mass > best_mass)) {
      best = m;
      best_size = size;
      best_mass = mass;
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (best >> i & 1u) out[i] = p[i] / best_mass;
  }
  return out;
}

// P(score_pos > score_neg) + 0.5 P(tie) over all pairs.
inline double pair_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// Forward pass written out layer by layer.
inline double mlp_pivot_probability(const pad::MlpParams& p, const pad::FeatureVector& f) {
  auto dense = [](const pad::Linear& l, const std::vector<double>& x, bool relu) {
    std::vector<double> y(static_cast<std::size_t>(l.out));
    for (int o = 0; o < l.out; ++o) {
      double acc = l.b[static_cast<std::size_t>(o)];
      for (int i = 0; i < l.in; ++i) {
        acc += l.w[static_cast<std::size_t>(o * l.in + i)] * x[static_cast<std::size_t>(i)];
      }
      y[static_cast<std::size_t>(o)] = relu ? std::max(0.0, acc) : acc;
    }
    return y;
  };
  const auto u = dense(p.hidden, f.h, true);
  const auto v = dense(p.scalar, {f.entropy, f.p_cand}, true);
  std::vector<double> c(u);
  c.insert(c.end(), v.begin(), v.end());
  const auto z = dense(p.out, dense(p.fuse, c, true), false);
  return 1.0 / (1.0 + std::exp(z[0] - z[1]));
}

// Exact expected utility of sampling from `model` after `prompt`, by
// visiting every token string of length `horizon`. A string counts once:
// only strings whose tokens after the first EOS are all EOS are kept, and
// its probability is that of the output up to and including the first EOS.
inline double enumerate_utility(const pad::SequenceModel& model, const pad::TokenSeq& prompt,
                                const pad::TokenSeq& prefix, int horizon,
                                const pad::UtilityFn& u, const pad::GenerationParams& params) {
  const int v = model.vocab_size();
  std::vector<int> digits(static_cast<std::size_t>(horizon), 0);
  double total = 0.0;
  const auto count = static_cast<long>(std::pow(v, horizon));
  for (long idx = 0; idx < count; ++idx) {
    long rem = idx;
    for (int d = horizon - 1; d >= 0; --d) {
      digits[static_cast<std::size_t>(d)] = static_cast<int>(rem % v);
      rem /= v;
    }
    int first_eos = horizon;
    for (int d = 0; d < horizon; ++d) {
      if (digits[static_cast<std::size_t>(d)] == pad::kEos) {
        first_eos = d;
        break;
      }
    }
    bool canonical = true;
    for (int d = first_eos + 1; d < horizon; ++d) canonical &= digits[static_cast<std::size_t>(d)] == pad::kEos;
    if (!canonical) continue;
    const int used = first_eos == horizon ? horizon : first_eos + 1;
    pad::TokenSeq ctx = prompt;
    ctx.insert(ctx.end(), prefix.begin(), prefix.end());
    pad::TokenSeq output = prefix;
    double prob = 1.0;
    for (int d = 0; d < used && prob > 0.0; ++d) {
      const auto dist = pad::adjust_distribution(model.next_distribution(ctx), params);
      const pad::TokenId t = digits[static_cast<std::size_t>(d)];
      prob *= dist[t];
      ctx.push_back(t);
      output.push_back(t);
    }
    if (prob > 0.0) total += prob * pad::utility(output, prompt, u);
  }
  return total;
}

}  // namespace oracle
