// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.h"
#include "pad/classifier.h"
#include "pad/errors.h"

using namespace pad;

namespace {

FeatureVector random_features(int d_h, Rng& rng) {
  FeatureVector f;
  f.h.resize(static_cast<std::size_t>(d_h));
  for (auto& x : f.h) x = 2.0 * rng.uniform() - 1.0;
  f.entropy = 2.0 * rng.uniform();
  f.p_cand = rng.uniform();
  return f;
}

// Pivot iff a fixed linear function of the features is positive.
std::vector<Example> separable(std::size_t n, int d_h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    FeatureVector f = random_features(d_h, rng);
    const double s = f.h[0] + 0.5 * f.h[1] - f.p_cand + 0.3;
    out.push_back({f, s > 0.0 ? kPivotClass : kNonPivotClass});
  }
  return out;
}

}  // namespace

TEST(Mlp, ForwardMatchesStraightLineOracle) {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const MlpDims dims{3 + t % 5, 4, 3, 5};
    const MlpParams p = MlpParams::init(dims, rng());
    const FeatureVector f = random_features(dims.d_h, rng);
    EXPECT_NEAR(mlp_forward(p, f), oracle::mlp_pivot_probability(p, f), 1e-14);
  }
}

TEST(Mlp, ShapesAndParameterCount) {
  const MlpDims d{32, 32, 8, 32};
  const MlpParams p = MlpParams::init(d, 1);
  EXPECT_EQ(p.num_params(), 32u * 32 + 32 + 2 * 8 + 8 + 40u * 32 + 32 + 32 * 2 + 2);
  EXPECT_EQ(p, MlpParams::init(d, 1));
  EXPECT_FALSE(p == MlpParams::init(d, 2));
  FeatureVector wrong;
  wrong.h.assign(5, 0.0);
  EXPECT_THROW(mlp_forward(p, wrong), ConfigError);
}

TEST(Mlp, FlatIndexCoversEveryParameter) {
  MlpParams p = MlpParams::init({2, 2, 2, 2}, 1);
  for (std::size_t i = 0; i < p.num_params(); ++i) p.at(i) = static_cast<double>(i);
  EXPECT_EQ(p.hidden.w[0], 0.0);
  EXPECT_EQ(p.out.b.back(), static_cast<double>(p.num_params() - 1));
}

TEST(WeightedCrossEntropy, HandComputedValue) {
  MlpParams p = MlpParams::init({1, 1, 1, 1}, 3);
  for (std::size_t i = 0; i < p.num_params(); ++i) p.at(i) = 0.0;
  // All-zero weights: logits equal, p = 1/2 for both classes.
  std::vector<Example> batch(3);
  for (auto& ex : batch) ex.features.h = {0.3};
  batch[0].label = kPivotClass;
  const ClassWeights w{1.0, 3.0};
  EXPECT_NEAR(weighted_cross_entropy(p, batch, w), (3.0 + 1.0 + 1.0) * std::log(2.0) / 3.0, 1e-15);
}

TEST(Gradient, AgreesWithFiniteDifferences) {
  Rng rng(5);
  const MlpDims dims{6, 5, 3, 4};
  const MlpParams p = MlpParams::init(dims, 8);
  std::vector<Example> batch;
  for (int i = 0; i < 8; ++i) batch.push_back({random_features(dims.d_h, rng), i % 2});
  const GradCheckResult r = grad_check(p, batch, {0.7, 1.9}, 4, 400);
  EXPECT_LT(r.max_relative_error, 1e-5);
  EXPECT_EQ(r.checked + r.skipped_kinks, p.num_params());  // 90 < 400: all coordinates

  MlpParams grad;
  const double loss = loss_and_gradient(p, batch, {0.7, 1.9}, grad);
  EXPECT_DOUBLE_EQ(loss, weighted_cross_entropy(p, batch, {0.7, 1.9}));
}

TEST(Split, DisjointCoveringAndSeeded) {
  const DataSplit s = split_indices(101, 0.8, 3);
  EXPECT_EQ(s.train.size(), 81u);
  EXPECT_EQ(s.test.size(), 20u);
  std::set<std::size_t> all(s.train.begin(), s.train.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 101u);
  EXPECT_EQ(s.train, split_indices(101, 0.8, 3).train);
  EXPECT_NE(s.train, split_indices(101, 0.8, 4).train);
}

TEST(Train, ReproducibleAndLearnsSeparableData) {
  const auto data = separable(600, 4, 1);
  TrainConfig cfg;
  cfg.dims = {4, 8, 4, 8};
  cfg.epochs = 40;
  cfg.learning_rate = 0.05;
  cfg.seed = 9;
  const TrainResult a = train(data, cfg);
  const TrainResult b = train(data, cfg);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.report.epochs.size(), 40u);
  EXPECT_EQ(a.report.train_size + a.report.val_size, data.size());
  double best = 1e300;
  for (const auto& e : a.report.epochs) best = std::min(best, e.val_loss);
  EXPECT_DOUBLE_EQ(a.report.best_val_loss, best);

  const DataSplit split = train_split(data.size(), cfg.split, cfg.seed);
  std::vector<Example> test;
  for (std::size_t i : split.test) test.push_back(data[i]);
  EXPECT_DOUBLE_EQ(weighted_cross_entropy(a.params, test, a.report.class_weights), best);
  EXPECT_GT(roc_auc(a.params, test).auc, 0.95);
}

TEST(Train, InverseFrequencyWeightsByDefault) {
  auto data = separable(400, 4, 2);
  TrainConfig cfg;
  cfg.dims = {4, 4, 2, 4};
  cfg.epochs = 1;
  const TrainResult r = train(data, cfg);
  const double n = static_cast<double>(r.report.train_size);
  const double pos = static_cast<double>(r.report.train_pivots);
  EXPECT_DOUBLE_EQ(r.report.class_weights.pivot, n / (2.0 * pos));
  EXPECT_DOUBLE_EQ(r.report.class_weights.non_pivot, n / (2.0 * (n - pos)));
}

TEST(Train, SingleClassIsDegenerate) {
  auto data = separable(100, 4, 3);
  for (auto& ex : data) ex.label = kNonPivotClass;
  TrainConfig cfg;
  cfg.dims.d_h = 4;
  EXPECT_THROW(train(data, cfg), DegenerateDatasetError);
  TrainConfig bad;
  bad.split = 1.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Roc, EqualsPairCountingWithTies) {
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng() % 40;
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 5);
      l[i] = static_cast<int>(rng() % 2);
    }
    l[0] = 1;
    l[1] = 0;
    EXPECT_EQ(roc_auc(s, l).auc, oracle::pair_auc(s, l));
  }
}

TEST(Roc, CurveShapeAndExtremes) {
  const RocResult perfect = roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0});
  EXPECT_EQ(perfect.auc, 1.0);
  ASSERT_EQ(perfect.points.size(), 5u);
  EXPECT_TRUE(std::isinf(perfect.points.front().threshold));
  EXPECT_EQ(perfect.points.front().fpr, 0.0);
  EXPECT_EQ(perfect.points.back().fpr, 1.0);
  EXPECT_EQ(perfect.points.back().tpr, 1.0);
  for (std::size_t i = 1; i < perfect.points.size(); ++i) {
    EXPECT_GE(perfect.points[i].fpr, perfect.points[i - 1].fpr);
    EXPECT_GE(perfect.points[i].tpr, perfect.points[i - 1].tpr);
  }
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}).auc, 0.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}).auc, 0.5);
  EXPECT_THROW(roc_auc(std::vector<double>{0.5, 0.4}, std::vector<int>{1, 1}), DegenerateDatasetError);
}

TEST(Roc, HanleyMcNeilStandardError) {
  EXPECT_NEAR(auc_standard_error(0.5, 10, 10), std::sqrt(0.0175), 1e-12);
  EXPECT_EQ(auc_standard_error(1.0, 10, 10), 0.0);
}

TEST(MlpScorer, ScoreIsForwardPass) {
  const MlpParams p = MlpParams::init({4, 4, 2, 4}, 3);
  Rng rng(1);
  const FeatureVector f = random_features(4, rng);
  EXPECT_EQ(MlpScorer(p).score(PositionInput{}, f), mlp_forward(p, f));
}
