// SPDX-License-Identifier: Apache-2.0
//
// Autoregressive model abstraction, sampling filters and the seeded synthetic
// model zoo used as a stand-in for real target/draft model pairs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/rng.h"

namespace pad {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

// Token id 0 terminates a sequence in every synthetic vocabulary.
inline constexpr TokenId kEos = 0;
inline constexpr int kDefaultHiddenDim = 32;
inline constexpr double kDistributionTolerance = 1e-9;

// Probability vector over a vocabulary of size V >= 2. Always valid: the
// constructor rejects negative entries and sums off 1 by more than 1e-9.
class Distribution {
 public:
  explicit Distribution(std::vector<double> probs);

  // Divides by the total mass; throws ConfigError when the mass is zero.
  static Distribution normalized(std::vector<double> weights);
  static Distribution uniform(int vocab_size);
  static Distribution point_mass(int vocab_size, TokenId token);

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](TokenId token) const { return probs_[static_cast<std::size_t>(token)]; }
  std::span<const double> probs() const { return probs_; }

  // Shannon entropy in nats.
  double entropy() const;

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<double> probs_;
};

struct GenerationParams {
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;  // nullopt = off
  int max_len = 32;
  std::uint64_t seed = 0;

  void validate() const;
  bool is_identity() const {
    return temperature == 1.0 && top_p == 1.0 && !top_k.has_value();
  }
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual int vocab_size() const = 0;
  // Number of trailing context tokens the model conditions on.
  virtual int order() const = 0;
  virtual int hidden_dim() const = 0;

  // Pure function of the context. Throws InvalidTokenError for ids >= V.
  virtual Distribution next_distribution(std::span<const TokenId> context) const = 0;
  // Deterministic, fixed-dimension context embedding.
  virtual std::vector<double> hidden_features(std::span<const TokenId> context) const = 0;
};

// Fixed random projection of the one-hot encoded last-k context. Positions
// before the start of a short context use a dedicated padding slot.
class HiddenProjection {
 public:
  HiddenProjection(int vocab_size, int order, int dim, std::uint64_t seed);

  int dim() const { return dim_; }
  std::vector<double> embed(std::span<const TokenId> context) const;

 private:
  int vocab_size_;
  int order_;
  int dim_;
  std::vector<double> bias_;
  std::vector<double> weights_;  // (order * (V + 1)) columns of length dim
};

// Dense k-gram table: one distribution per last-k context class. Contexts
// shorter than k are left-padded with EOS.
class TableModel final : public SequenceModel {
 public:
  TableModel(int vocab_size, int order, std::vector<Distribution> rows,
             std::shared_ptr<const HiddenProjection> projection);

  static TableModel uniform(int vocab_size, int hidden_dim = kDefaultHiddenDim);
  // Order-0 model emitting `marginal` regardless of context.
  static TableModel from_marginal(const Distribution& marginal,
                                  int hidden_dim = kDefaultHiddenDim);
  // Rows drawn from a symmetric Dirichlet(row_alpha). The EOS column is
  // scaled by eos_scale before renormalizing (0 disables termination).
  static TableModel random(int vocab_size, int order, std::uint64_t seed,
                           double row_alpha = 0.5, int hidden_dim = kDefaultHiddenDim,
                           double eos_scale = 1.0);

  // Row-wise (1 - strength) * row + strength * uniform, renormalized.
  // The projection is shared with this model.
  TableModel mixed_with_uniform(double strength) const;

  int vocab_size() const override { return vocab_size_; }
  int order() const override { return order_; }
  int hidden_dim() const override { return projection_->dim(); }
  Distribution next_distribution(std::span<const TokenId> context) const override;
  std::vector<double> hidden_features(std::span<const TokenId> context) const override;

  std::size_t num_rows() const { return rows_.size(); }
  const Distribution& row(std::size_t index) const { return rows_[index]; }
  std::size_t row_index(std::span<const TokenId> context) const;

 private:
  int vocab_size_;
  int order_;
  std::vector<Distribution> rows_;
  std::shared_ptr<const HiddenProjection> projection_;
};

enum class UtilityKind { kSubstring, kChecksum };

// Identifies a built-in binary utility task (see pad/utility.h).
struct UtilitySpec {
  UtilityKind kind = UtilityKind::kChecksum;
  // Bigram that must appear in the output for the substring task.
  TokenSeq pattern = {2, 3};
};

std::string to_string(UtilityKind kind);
UtilityKind utility_kind_from_string(const std::string& name);

struct SyntheticTaskSpec {
  int vocab_size = 8;
  int order = 1;
  double perturbation = 0.3;
  int hidden_dim = kDefaultHiddenDim;
  double eos_scale = 1.0;
  UtilitySpec utility;
  int num_contexts = 200;
  int context_len = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticPair {
  std::shared_ptr<const TableModel> target;
  std::shared_ptr<const TableModel> draft;
};

SyntheticPair make_synthetic_pair(const SyntheticTaskSpec& spec);
// Prompts for the task: num_contexts sequences of context_len non-EOS tokens.
std::vector<TokenSeq> make_contexts(const SyntheticTaskSpec& spec);

// Throws InvalidTokenError if any id is outside [0, vocab_size).
void check_tokens(std::span<const TokenId> tokens, int vocab_size);

// Temperature scaling, then top-k, then top-p (smallest prefix of the
// descending order whose mass reaches top_p), then renormalization.
Distribution adjust_distribution(const Distribution& dist, const GenerationParams& params);

// Inverse-CDF draw using exactly one rng.uniform().
TokenId sample_token(const Distribution& dist, Rng& rng);

TokenSeq concat(std::span<const TokenId> a, std::span<const TokenId> b);

// Samples from the adjusted model until EOS (included) or params.max_len
// tokens. Returns the generated suffix only.
TokenSeq rollout(const SequenceModel& model, std::span<const TokenId> context,
                 const GenerationParams& params, Rng& rng);

}  // namespace pad
