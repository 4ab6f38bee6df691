// SPDX-License-Identifier: Apache-2.0

#include "pad/classifier.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "pad/errors.h"

namespace pad {

namespace {

enum SeedTag : std::uint64_t { kSplitSeed = 1, kInitSeed = 2, kShuffleSeed = 3 };

struct Activations {
  std::vector<double> u_pre, u, s, v_pre, v, c, f_pre, f;
  std::array<double, 2> z{};
};

void affine(const Linear& layer, std::span<const double> x, std::vector<double>& y) {
  y.assign(layer.b.begin(), layer.b.end());
  for (int o = 0; o < layer.out; ++o) {
    const double* row = layer.w.data() + static_cast<std::size_t>(o) * layer.in;
    double acc = 0.0;
    for (int i = 0; i < layer.in; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(o)] += acc;
  }
}

std::vector<double> relu(const std::vector<double>& x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

void forward(const MlpParams& p, const FeatureVector& f, Activations& a) {
  if (static_cast<int>(f.h.size()) != p.dims.d_h) {
    throw ConfigError("feature dimension " + std::to_string(f.h.size()) +
                      " does not match classifier d_h " + std::to_string(p.dims.d_h));
  }
  affine(p.hidden, f.h, a.u_pre);
  a.u = relu(a.u_pre);
  a.s = {f.entropy, f.p_cand};
  affine(p.scalar, a.s, a.v_pre);
  a.v = relu(a.v_pre);
  a.c = a.u;
  a.c.insert(a.c.end(), a.v.begin(), a.v.end());
  affine(p.fuse, a.c, a.f_pre);
  a.f = relu(a.f_pre);
  std::vector<double> z;
  affine(p.out, a.f, z);
  a.z = {z[0], z[1]};
}

// -log softmax(z)[label], computed stably.
double nll(const std::array<double, 2>& z, int label) {
  const double m = std::max(z[0], z[1]);
  const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
  return lse - z[static_cast<std::size_t>(label)];
}

double pivot_probability(const std::array<double, 2>& z) {
  return 1.0 / (1.0 + std::exp(z[kNonPivotClass] - z[kPivotClass]));
}

// Accumulates dL/dparams for one sample with dL/dz = coef * (softmax - onehot).
void backward(const MlpParams& p, const Activations& a, const FeatureVector& f, int label,
              double coef, MlpParams& g) {
  const double p1 = pivot_probability(a.z);
  const std::array<double, 2> dz = {coef * ((1.0 - p1) - (label == kNonPivotClass ? 1.0 : 0.0)),
                                    coef * (p1 - (label == kPivotClass ? 1.0 : 0.0))};

  auto accumulate_layer = [](const Linear& layer, std::span<const double> x,
                             std::span<const double> dy, Linear& grad,
                             std::vector<double>* dx) {
    if (dx) dx->assign(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = dy[static_cast<std::size_t>(o)];
      if (d == 0.0) continue;
      grad.b[static_cast<std::size_t>(o)] += d;
      const std::size_t base = static_cast<std::size_t>(o) * layer.in;
      for (int i = 0; i < layer.in; ++i) {
        grad.w[base + i] += d * x[static_cast<std::size_t>(i)];
        if (dx) (*dx)[static_cast<std::size_t>(i)] += d * layer.w[base + i];
      }
    }
  };
  auto gate = [](std::vector<double>& d, const std::vector<double>& pre) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (!(pre[i] > 0.0)) d[i] = 0.0;
    }
  };

  std::vector<double> df, dc;
  accumulate_layer(p.out, a.f, dz, g.out, &df);
  gate(df, a.f_pre);
  accumulate_layer(p.fuse, a.c, df, g.fuse, &dc);
  std::vector<double> du(dc.begin(), dc.begin() + p.dims.d_u);
  std::vector<double> dv(dc.begin() + p.dims.d_u, dc.end());
  gate(du, a.u_pre);
  gate(dv, a.v_pre);
  accumulate_layer(p.hidden, f.h, du, g.hidden, nullptr);
  accumulate_layer(p.scalar, a.s, dv, g.scalar, nullptr);
}

// ReLU on/off pattern over a batch; used to detect kink crossings.
std::vector<bool> relu_pattern(const MlpParams& p, std::span<const Example> batch) {
  std::vector<bool> pattern;
  Activations a;
  for (const auto& ex : batch) {
    forward(p, ex.features, a);
    for (double x : a.u_pre) pattern.push_back(x > 0.0);
    for (double x : a.v_pre) pattern.push_back(x > 0.0);
    for (double x : a.f_pre) pattern.push_back(x > 0.0);
  }
  return pattern;
}

// Fisher-Yates with a bit-exact uniform source.
void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace

Linear::Linear(int in_dim, int out_dim)
    : in(in_dim),
      out(out_dim),
      w(static_cast<std::size_t>(in_dim) * out_dim, 0.0),
      b(static_cast<std::size_t>(out_dim), 0.0) {
  if (in_dim < 1 || out_dim < 1) throw ConfigError("layer dimensions must be positive");
}

MlpParams::MlpParams(const MlpDims& d)
    : dims(d),
      hidden(d.d_h, d.d_u),
      scalar(2, d.d_v),
      fuse(d.d_u + d.d_v, d.d_f),
      out(d.d_f, 2) {}

MlpParams MlpParams::init(const MlpDims& d, std::uint64_t seed) {
  MlpParams p(d);
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Linear* layer : {&p.hidden, &p.scalar, &p.fuse, &p.out}) {
    const double scale = std::sqrt(2.0 / layer->in);
    for (double& w : layer->w) w = scale * normal(rng);
  }
  return p;
}

std::size_t MlpParams::num_params() const {
  return hidden.num_params() + scalar.num_params() + fuse.num_params() + out.num_params();
}

double& MlpParams::at(std::size_t index) {
  for (Linear* layer : {&hidden, &scalar, &fuse, &out}) {
    if (index < layer->w.size()) return layer->w[index];
    index -= layer->w.size();
    if (index < layer->b.size()) return layer->b[index];
    index -= layer->b.size();
  }
  throw std::out_of_range("parameter index out of range");
}

double MlpParams::at(std::size_t index) const {
  return const_cast<MlpParams*>(this)->at(index);
}

std::array<double, 2> mlp_logits(const MlpParams& params, const FeatureVector& f) {
  Activations a;
  forward(params, f, a);
  return a.z;
}

double mlp_forward(const MlpParams& params, const FeatureVector& f) {
  return pivot_probability(mlp_logits(params, f));
}

double weighted_cross_entropy(const MlpParams& params, std::span<const Example> batch,
                              const ClassWeights& weights) {
  if (batch.empty()) throw EmptyStatsError("empty batch");
  Activations a;
  double total = 0.0;
  for (const auto& ex : batch) {
    forward(params, ex.features, a);
    total += weights[ex.label] * nll(a.z, ex.label);
  }
  return total / static_cast<double>(batch.size());
}

double loss_and_gradient(const MlpParams& params, std::span<const Example> batch,
                         const ClassWeights& weights, MlpParams& grad) {
  if (batch.empty()) throw EmptyStatsError("empty batch");
  grad = MlpParams(params.dims);
  Activations a;
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const auto& ex : batch) {
    forward(params, ex.features, a);
    total += weights[ex.label] * nll(a.z, ex.label);
    backward(params, a, ex.features, ex.label, weights[ex.label] * inv_b, grad);
  }
  return total * inv_b;
}

GradCheckResult grad_check(const MlpParams& params, std::span<const Example> batch,
                           const ClassWeights& weights, std::uint64_t seed,
                           std::size_t max_coords, double step) {
  if (batch.empty()) throw EmptyStatsError("empty batch");
  MlpParams grad;
  loss_and_gradient(params, batch, weights, grad);

  std::vector<std::size_t> coords(params.num_params());
  std::iota(coords.begin(), coords.end(), 0);
  Rng rng(seed);
  shuffle(coords, rng);
  coords.resize(std::min(max_coords, coords.size()));

  const std::vector<bool> base_pattern = relu_pattern(params, batch);
  GradCheckResult result;
  MlpParams probe = params;
  for (std::size_t idx : coords) {
    const double orig = probe.at(idx);
    probe.at(idx) = orig + step;
    const bool plus_same = relu_pattern(probe, batch) == base_pattern;
    const double lp = weighted_cross_entropy(probe, batch, weights);
    probe.at(idx) = orig - step;
    const bool minus_same = relu_pattern(probe, batch) == base_pattern;
    const double lm = weighted_cross_entropy(probe, batch, weights);
    probe.at(idx) = orig;
    if (!plus_same || !minus_same) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = grad.at(idx);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_relative_error =
        std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  return result;
}

void TrainConfig::validate() const {
  if (!(split > 0.0 && split < 1.0)) throw ConfigError("split must be in (0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (class_weights && !(class_weights->pivot > 0.0 && class_weights->non_pivot > 0.0)) {
    throw ConfigError("class weights must be positive");
  }
  if (dims.d_h < 1 || dims.d_u < 1 || dims.d_v < 1 || dims.d_f < 1) {
    throw ConfigError("layer dimensions must be positive");
  }
}

DataSplit split_indices(std::size_t n, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  DataSplit s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return s;
}

DataSplit train_split(std::size_t n, double fraction, std::uint64_t train_seed) {
  return split_indices(n, fraction, derive_seed(train_seed, {kSplitSeed}));
}

TrainResult train(std::span<const Example> dataset, const TrainConfig& cfg) {
  cfg.validate();
  const DataSplit split = train_split(dataset.size(), cfg.split, cfg.seed);
  std::vector<Example> train_set, val_set;
  for (std::size_t i : split.train) train_set.push_back(dataset[i]);
  for (std::size_t i : split.test) val_set.push_back(dataset[i]);

  TrainReport report;
  report.train_size = train_set.size();
  report.val_size = val_set.size();
  for (const auto& ex : train_set) report.train_pivots += ex.label == kPivotClass;
  for (const auto& ex : val_set) report.val_pivots += ex.label == kPivotClass;
  const std::size_t train_neg = report.train_size - report.train_pivots;
  if (report.train_pivots == 0 || train_neg == 0) {
    throw DegenerateDatasetError("training split contains a single class");
  }
  for (const auto& ex : dataset) {
    if (static_cast<int>(ex.features.h.size()) != cfg.dims.d_h) {
      throw ConfigError("dataset feature dimension does not match d_h");
    }
  }

  if (cfg.class_weights) {
    report.class_weights = *cfg.class_weights;
  } else {
    const double n = static_cast<double>(report.train_size);
    report.class_weights.pivot = n / (2.0 * static_cast<double>(report.train_pivots));
    report.class_weights.non_pivot = n / (2.0 * static_cast<double>(train_neg));
  }
  const ClassWeights& weights = report.class_weights;

  MlpParams params = MlpParams::init(cfg.dims, derive_seed(cfg.seed, {kInitSeed}));
  MlpParams best = params;
  report.best_val_loss = std::numeric_limits<double>::infinity();

  Rng shuffle_rng(derive_seed(cfg.seed, {kShuffleSeed}));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  MlpParams grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
      loss_and_gradient(params, batch, weights, grad);
      for (std::size_t i = 0; i < params.num_params(); ++i) {
        params.at(i) -= cfg.learning_rate * grad.at(i);
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = weighted_cross_entropy(params, train_set, weights);
    stats.val_loss =
        val_set.empty() ? stats.train_loss : weighted_cross_entropy(params, val_set, weights);
    report.epochs.push_back(stats);
    if (stats.val_loss < report.best_val_loss) {
      report.best_val_loss = stats.val_loss;
      report.best_epoch = epoch;
      best = params;
    }
  }
  return {std::move(best), std::move(report)};
}

RocResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores and labels differ in length");
  RocResult r;
  for (int y : labels) (y == kPivotClass ? r.positives : r.negatives)++;
  if (r.positives == 0 || r.negatives == 0) {
    throw DegenerateDatasetError("ROC needs both classes");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const double P = static_cast<double>(r.positives);
  const double N = static_cast<double>(r.negatives);
  r.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  // Twice the area in units of (1/P)(1/N), kept integral so the result is
  // exactly the Mann-Whitney statistic with ties counted as 1/2.
  unsigned long long area2 = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    const std::size_t tp_prev = tp, fp_prev = fp;
    for (; i < order.size() && scores[order[i]] == threshold; ++i) {
      (labels[order[i]] == kPivotClass ? tp : fp)++;
    }
    area2 += static_cast<unsigned long long>(fp - fp_prev) * (tp + tp_prev);
    r.points.push_back({threshold, static_cast<double>(fp) / N, static_cast<double>(tp) / P});
  }
  r.auc = static_cast<double>(area2) / (2.0 * P * N);
  return r;
}

RocResult roc_auc(const MlpParams& params, std::span<const Example> test_set) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& ex : test_set) {
    scores.push_back(mlp_forward(params, ex.features));
    labels.push_back(ex.label);
  }
  return roc_auc(scores, labels);
}

double auc_standard_error(double auc, std::size_t positives, std::size_t negatives) {
  const double np = static_cast<double>(positives), nn = static_cast<double>(negatives);
  const double q1 = auc / (2.0 - auc);
  const double q2 = 2.0 * auc * auc / (1.0 + auc);
  const double var = (auc * (1.0 - auc) + (np - 1.0) * (q1 - auc * auc) +
                      (nn - 1.0) * (q2 - auc * auc)) /
                     (np * nn);
  return std::sqrt(std::max(0.0, var));
}

MlpScorer::MlpScorer(MlpParams params) : params_(std::move(params)) {}

double MlpScorer::score(const PositionInput&, const FeatureVector& features) const {
  return mlp_forward(params_, features);
}

}  // namespace pad
