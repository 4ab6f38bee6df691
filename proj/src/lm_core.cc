// SPDX-License-Identifier: Apache-2.0

#include "pad/lm_core.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pad/errors.h"

namespace pad {

namespace {

constexpr std::size_t kMaxTableRows = std::size_t{1} << 22;

enum SeedTag : std::uint64_t { kTableSeed = 1, kProjectionSeed = 2, kContextSeed = 3 };

}  // namespace

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw ConfigError("distribution needs at least 2 entries");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw ConfigError("distribution has a negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kDistributionTolerance) {
    throw ConfigError("distribution sums to " + std::to_string(total));
  }
}

Distribution Distribution::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ConfigError("cannot normalize zero or non-finite mass");
  }
  for (double& w : weights) w /= total;
  return Distribution(std::move(weights));
}

Distribution Distribution::uniform(int vocab_size) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
  return Distribution(std::vector<double>(static_cast<std::size_t>(vocab_size),
                                          1.0 / vocab_size));
}

Distribution Distribution::point_mass(int vocab_size, TokenId token) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
  check_tokens(std::span<const TokenId>(&token, 1), vocab_size);
  std::vector<double> probs(static_cast<std::size_t>(vocab_size), 0.0);
  probs[static_cast<std::size_t>(token)] = 1.0;
  return Distribution(std::move(probs));
}

double Distribution::entropy() const {
  double h = 0.0;
  for (double p : probs_) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(0.0, h);
}

void GenerationParams::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ConfigError("temperature must be positive");
  }
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (top_k && *top_k < 1) throw ConfigError("top_k must be positive or off");
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
}

HiddenProjection::HiddenProjection(int vocab_size, int order, int dim, std::uint64_t seed)
    : vocab_size_(vocab_size), order_(order), dim_(dim) {
  if (dim < 1) throw ConfigError("hidden dimension must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(std::max(1, order)));
  bias_.resize(static_cast<std::size_t>(dim));
  for (double& b : bias_) b = 0.1 * normal(rng);
  weights_.resize(static_cast<std::size_t>(order) * (vocab_size + 1) * dim);
  for (double& w : weights_) w = scale * normal(rng);
}

std::vector<double> HiddenProjection::embed(std::span<const TokenId> context) const {
  std::vector<double> out = bias_;
  const auto n = static_cast<int>(context.size());
  for (int j = 0; j < order_; ++j) {
    // Slot j holds the token j places before the end; V is the padding slot.
    const int pos = n - 1 - j;
    const int slot = pos >= 0 ? context[static_cast<std::size_t>(pos)] : vocab_size_;
    const std::size_t column = static_cast<std::size_t>(j) * (vocab_size_ + 1) + slot;
    const double* w = weights_.data() + column * dim_;
    for (int d = 0; d < dim_; ++d) out[static_cast<std::size_t>(d)] += w[d];
  }
  return out;
}

TableModel::TableModel(int vocab_size, int order, std::vector<Distribution> rows,
                       std::shared_ptr<const HiddenProjection> projection)
    : vocab_size_(vocab_size),
      order_(order),
      rows_(std::move(rows)),
      projection_(std::move(projection)) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
  if (order < 0) throw ConfigError("order must be >= 0");
  std::size_t expected = 1;
  for (int i = 0; i < order; ++i) {
    expected *= static_cast<std::size_t>(vocab_size);
    if (expected > kMaxTableRows) throw ConfigError("k-gram table too large");
  }
  if (rows_.size() != expected) throw ConfigError("table row count does not match V^k");
  for (const auto& row : rows_) {
    if (row.size() != vocab_size) throw ConfigError("table row has wrong width");
  }
  if (!projection_) throw ConfigError("missing hidden projection");
}

TableModel TableModel::uniform(int vocab_size, int hidden_dim) {
  return from_marginal(Distribution::uniform(vocab_size), hidden_dim);
}

TableModel TableModel::from_marginal(const Distribution& marginal, int hidden_dim) {
  auto projection = std::make_shared<HiddenProjection>(marginal.size(), 0, hidden_dim, 0);
  return TableModel(marginal.size(), 0, {marginal}, std::move(projection));
}

TableModel TableModel::random(int vocab_size, int order, std::uint64_t seed, double row_alpha,
                              int hidden_dim, double eos_scale) {
  if (vocab_size < 2) throw ConfigError("vocabulary size must be >= 2");
  if (order < 0) throw ConfigError("order must be >= 0");
  if (!(row_alpha > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
  if (!(eos_scale >= 0.0 && eos_scale <= 1.0)) throw ConfigError("eos_scale must be in [0, 1]");
  std::size_t num_rows = 1;
  for (int i = 0; i < order; ++i) {
    num_rows *= static_cast<std::size_t>(vocab_size);
    if (num_rows > kMaxTableRows) throw ConfigError("k-gram table too large");
  }
  Rng rng(derive_seed(seed, {kTableSeed}));
  std::gamma_distribution<double> gamma(row_alpha, 1.0);
  std::vector<Distribution> rows;
  rows.reserve(num_rows);
  for (std::size_t r = 0; r < num_rows; ++r) {
    std::vector<double> w(static_cast<std::size_t>(vocab_size));
    for (double& x : w) x = gamma(rng);
    w[kEos] *= eos_scale;
    if (std::accumulate(w.begin(), w.end(), 0.0) <= 0.0) std::fill(w.begin(), w.end(), 1.0);
    rows.push_back(Distribution::normalized(std::move(w)));
  }
  auto projection = std::make_shared<HiddenProjection>(
      vocab_size, order, hidden_dim, derive_seed(seed, {kProjectionSeed}));
  return TableModel(vocab_size, order, std::move(rows), std::move(projection));
}

TableModel TableModel::mixed_with_uniform(double strength) const {
  if (!(strength >= 0.0 && strength <= 1.0)) {
    throw ConfigError("perturbation strength must be in [0, 1]");
  }
  if (strength == 0.0) return *this;
  std::vector<Distribution> rows;
  rows.reserve(rows_.size());
  const double u = 1.0 / vocab_size_;
  for (const auto& row : rows_) {
    std::vector<double> w(row.probs().begin(), row.probs().end());
    for (double& x : w) x = (1.0 - strength) * x + strength * u;
    rows.push_back(Distribution::normalized(std::move(w)));
  }
  return TableModel(vocab_size_, order_, std::move(rows), projection_);
}

std::size_t TableModel::row_index(std::span<const TokenId> context) const {
  check_tokens(context, vocab_size_);
  std::size_t index = 0;
  const auto n = static_cast<int>(context.size());
  for (int j = order_; j >= 1; --j) {
    const int pos = n - j;
    const TokenId t = pos >= 0 ? context[static_cast<std::size_t>(pos)] : kEos;
    index = index * static_cast<std::size_t>(vocab_size_) + static_cast<std::size_t>(t);
  }
  return index;
}

Distribution TableModel::next_distribution(std::span<const TokenId> context) const {
  return rows_[row_index(context)];
}

std::vector<double> TableModel::hidden_features(std::span<const TokenId> context) const {
  check_tokens(context, vocab_size_);
  return projection_->embed(context);
}

std::string to_string(UtilityKind kind) {
  switch (kind) {
    case UtilityKind::kSubstring:
      return "substring";
    case UtilityKind::kChecksum:
      return "checksum";
  }
  return "unknown";
}

UtilityKind utility_kind_from_string(const std::string& name) {
  if (name == "substring") return UtilityKind::kSubstring;
  if (name == "checksum") return UtilityKind::kChecksum;
  throw ConfigError("unknown utility kind '" + name + "'");
}

void SyntheticTaskSpec::validate() const {
  if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
  if (order < 0) throw ConfigError("order must be >= 0");
  if (!(perturbation >= 0.0 && perturbation <= 1.0)) {
    throw ConfigError("perturbation must be in [0, 1]");
  }
  if (hidden_dim < 1) throw ConfigError("d_h must be >= 1");
  if (!(eos_scale >= 0.0 && eos_scale <= 1.0)) throw ConfigError("eos_scale must be in [0, 1]");
  if (num_contexts < 1) throw ConfigError("num_contexts must be >= 1");
  if (context_len < 0) throw ConfigError("context_len must be >= 0");
  if (utility.kind == UtilityKind::kSubstring) {
    if (utility.pattern.size() != 2) throw ConfigError("substring pattern must be a bigram");
    check_tokens(utility.pattern, vocab_size);
  }
}

SyntheticPair make_synthetic_pair(const SyntheticTaskSpec& spec) {
  spec.validate();
  auto target = std::make_shared<const TableModel>(TableModel::random(
      spec.vocab_size, spec.order, spec.seed, 0.5, spec.hidden_dim, spec.eos_scale));
  auto draft = std::make_shared<const TableModel>(target->mixed_with_uniform(spec.perturbation));
  return {std::move(target), std::move(draft)};
}

std::vector<TokenSeq> make_contexts(const SyntheticTaskSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, {kContextSeed}));
  std::vector<TokenSeq> contexts(static_cast<std::size_t>(spec.num_contexts));
  for (auto& ctx : contexts) {
    ctx.resize(static_cast<std::size_t>(spec.context_len));
    for (auto& t : ctx) {
      t = 1 + static_cast<TokenId>(rng.uniform() * (spec.vocab_size - 1));
    }
  }
  return contexts;
}

void check_tokens(std::span<const TokenId> tokens, int vocab_size) {
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab_size) {
      throw InvalidTokenError("token " + std::to_string(t) + " outside vocabulary of size " +
                              std::to_string(vocab_size));
    }
  }
}

Distribution adjust_distribution(const Distribution& dist, const GenerationParams& params) {
  params.validate();
  if (params.is_identity()) return dist;

  const auto probs = dist.probs();
  std::vector<double> w(probs.begin(), probs.end());
  if (params.temperature != 1.0) {
    // Scaling log-probabilities by 1/T is p^(1/T); zeros stay zero.
    double max_p = *std::max_element(w.begin(), w.end());
    for (double& x : w) x = x > 0.0 ? std::pow(x / max_p, 1.0 / params.temperature) : 0.0;
  }

  std::vector<std::size_t> order(w.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });

  std::size_t keep = order.size();
  if (params.top_k) keep = std::min(keep, static_cast<std::size_t>(*params.top_k));
  if (params.top_p < 1.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < keep; ++i) total += w[order[i]];
    double covered = 0.0;
    std::size_t nucleus = 0;
    while (nucleus < keep) {
      covered += w[order[nucleus++]];
      if (covered >= params.top_p * total) break;
    }
    keep = nucleus;
  }
  // Never return an empty support: the argmax always survives.
  keep = std::max<std::size_t>(keep, 1);

  std::vector<double> out(w.size(), 0.0);
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = w[order[i]];
  if (std::accumulate(out.begin(), out.end(), 0.0) <= 0.0) out[order[0]] = 1.0;
  return Distribution::normalized(std::move(out));
}

TokenId sample_token(const Distribution& dist, Rng& rng) {
  const double u = rng.uniform();
  const auto probs = dist.probs();
  double cum = 0.0;
  TokenId last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cum += probs[i];
    last_positive = static_cast<TokenId>(i);
    if (u < cum) return last_positive;
  }
  return last_positive;
}

TokenSeq concat(std::span<const TokenId> a, std::span<const TokenId> b) {
  TokenSeq out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

TokenSeq rollout(const SequenceModel& model, std::span<const TokenId> context,
                 const GenerationParams& params, Rng& rng) {
  params.validate();
  TokenSeq full(context.begin(), context.end());
  const std::size_t start = full.size();
  for (int i = 0; i < params.max_len; ++i) {
    const TokenId t = sample_token(adjust_distribution(model.next_distribution(full), params), rng);
    full.push_back(t);
    if (t == kEos) break;
  }
  return TokenSeq(full.begin() + static_cast<std::ptrdiff_t>(start), full.end());
}

}  // namespace pad
