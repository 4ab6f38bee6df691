// SPDX-License-Identifier: Apache-2.0
//
// Two-branch MLP pivot classifier:
//   u = relu(W_h h + b_h), v = relu(W_s [H, p] + b_s),
//   z = W_out relu(W_fuse (u ++ v) + b_fuse) + b_out, score = softmax(z)[pivot].

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pad/features.h"
#include "pad/pivot_gate.h"
#include "pad/rng.h"

namespace pad {

inline constexpr int kNonPivotClass = 0;
inline constexpr int kPivotClass = 1;

struct MlpDims {
  int d_h = kDefaultHiddenDim;
  int d_u = 32;
  int d_v = 8;
  int d_f = 32;

  friend bool operator==(const MlpDims&, const MlpDims&) = default;
};

// Dense layer y = W x + b with W stored row-major (out x in).
struct Linear {
  int in = 0;
  int out = 0;
  std::vector<double> w;
  std::vector<double> b;

  Linear() = default;
  Linear(int in_dim, int out_dim);
  std::size_t num_params() const { return w.size() + b.size(); }

  friend bool operator==(const Linear&, const Linear&) = default;
};

struct MlpParams {
  MlpDims dims;
  Linear hidden;  // d_h -> d_u
  Linear scalar;  // 2 -> d_v
  Linear fuse;    // d_u + d_v -> d_f
  Linear out;     // d_f -> 2

  MlpParams() = default;
  explicit MlpParams(const MlpDims& d);

  // He-normal weights, zero biases.
  static MlpParams init(const MlpDims& d, std::uint64_t seed);

  std::size_t num_params() const;
  // Flat view over every weight and bias, in layer order.
  double& at(std::size_t index);
  double at(std::size_t index) const;

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

struct Example {
  FeatureVector features;
  int label = kNonPivotClass;
};

// Softmax probability of the pivot class. Throws ConfigError when the
// feature dimension does not match.
double mlp_forward(const MlpParams& params, const FeatureVector& f);
// Both logits (non-pivot, pivot).
std::array<double, 2> mlp_logits(const MlpParams& params, const FeatureVector& f);

struct ClassWeights {
  double non_pivot = 1.0;
  double pivot = 1.0;

  double operator[](int label) const { return label == kPivotClass ? pivot : non_pivot; }
};

// (1/B) * sum_i w[y_i] * -log softmax(z_i)[y_i]
double weighted_cross_entropy(const MlpParams& params, std::span<const Example> batch,
                              const ClassWeights& weights);

// Loss and its gradient with respect to every parameter (same layout as
// MlpParams::at).
double loss_and_gradient(const MlpParams& params, std::span<const Example> batch,
                         const ClassWeights& weights, MlpParams& grad);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Coordinates skipped because a perturbation changed some ReLU pattern.
  std::size_t skipped_kinks = 0;
};

// Central finite differences (step 1e-5) on up to `max_coords` randomly
// chosen parameters. Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const MlpParams& params, std::span<const Example> batch,
                           const ClassWeights& weights, std::uint64_t seed,
                           std::size_t max_coords = 200, double step = 1e-5);

struct TrainConfig {
  MlpDims dims;
  // Unset weights default to inverse class frequency in the training split.
  std::optional<ClassWeights> class_weights;
  double split = 0.8;
  int epochs = 60;
  double learning_rate = 1e-2;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  ClassWeights class_weights;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
  std::size_t train_pivots = 0;
  std::size_t val_pivots = 0;
};

struct TrainResult {
  MlpParams params;
  TrainReport report;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded shuffle, first `fraction` of indices to train.
DataSplit split_indices(std::size_t n, double fraction, std::uint64_t seed);
// The split train() uses for TrainConfig::seed == train_seed.
DataSplit train_split(std::size_t n, double fraction, std::uint64_t train_seed);

// Mini-batch gradient descent on the weighted cross-entropy. The held-out
// part of the split doubles as the validation set; the returned params are
// those of the epoch with the lowest validation loss.
// Throws DegenerateDatasetError if the training split lacks a class.
TrainResult train(std::span<const Example> dataset, const TrainConfig& cfg);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  std::vector<RocPoint> points;
  double auc = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// ROC over every distinct score (ties share one threshold) and the
// trapezoidal AUC. Labels are 1 for pivot. Throws DegenerateDatasetError
// for a single-class set.
RocResult roc_auc(std::span<const double> scores, std::span<const int> labels);
RocResult roc_auc(const MlpParams& params, std::span<const Example> test_set);

// Hanley-McNeil standard error of an AUC estimate.
double auc_standard_error(double auc, std::size_t positives, std::size_t negatives);

class MlpScorer final : public PivotScorer {
 public:
  explicit MlpScorer(MlpParams params);
  double score(const PositionInput&, const FeatureVector& features) const override;
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

}  // namespace pad
