// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <stdexcept>

#include "pad/errors.h"
#include "pad/pivot_gate.h"

using namespace pad;

namespace {

class CountingScorer final : public PivotScorer {
 public:
  explicit CountingScorer(double value) : value_(value) {}
  double score(const PositionInput&, const FeatureVector&) const override {
    ++calls;
    return value_;
  }
  mutable std::atomic<int> calls{0};

 private:
  double value_;
};

class ThrowingScorer final : public PivotScorer {
 public:
  double score(const PositionInput&, const FeatureVector&) const override {
    throw std::runtime_error("classifier unavailable");
  }
};

struct Fixture {
  Distribution target_dist = Distribution({0.1, 0.2, 0.3, 0.4});
  TableModel model = TableModel::random(4, 1, 3);
  TokenSeq prompt = {1, 2};

  PositionInput position(double p_target, double p_draft, double coin) const {
    PositionInput in;
    in.prompt = prompt;
    in.candidate = 1;
    in.p_target = p_target;
    in.p_draft = p_draft;
    in.coin = coin;
    in.target_dist = &target_dist;
    in.target = &model;
    return in;
  }
};

}  // namespace

TEST(PadDecide, DecisionTable) {
  GateConfig g;
  g.sigma = 0.5;
  const auto a = pad_decide(Decision::kAccept, 0.99, 1e-9, g);
  EXPECT_EQ(a.decision, Decision::kAccept);
  EXPECT_EQ(a.source, DecisionSource::kSdAccept);
  const auto floor = pad_decide(Decision::kReject, 0.0, 5e-5, g);
  EXPECT_EQ(floor.decision, Decision::kReject);
  EXPECT_EQ(floor.source, DecisionSource::kSdReject);
  const auto over = pad_decide(Decision::kReject, 0.49, 1e-4, g);
  EXPECT_EQ(over.decision, Decision::kAccept);
  EXPECT_EQ(over.source, DecisionSource::kPadOverride);
  EXPECT_EQ(pad_decide(Decision::kReject, 0.5, 0.3, g).decision, Decision::kReject);
  EXPECT_EQ(pad_decide(Decision::kReject, 0.9, 0.3, g).decision, Decision::kReject);
}

TEST(PadDecide, SigmaZeroNeverOverrides) {
  GateConfig g;
  g.sigma = 0.0;
  EXPECT_EQ(pad_decide(Decision::kReject, 0.0, 0.5, g).decision, Decision::kReject);
}

TEST(GateConfig, Validation) {
  GateConfig g;
  g.sigma = 1.5;
  EXPECT_THROW(g.validate(), ConfigError);
  g.sigma = 0.5;
  g.prob_floor = -1.0;
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_THROW(PadPolicy(nullptr, GateConfig{}), ConfigError);
  EXPECT_THROW(ConstantScorer(2.0), ConfigError);
}

TEST(PadPolicy, ScoresOnlySdRejections) {
  Fixture fx;
  auto scorer = std::make_shared<CountingScorer>(0.0);
  const PadPolicy policy(scorer, GateConfig{});
  const auto acc = policy.decide(fx.position(0.2, 0.4, 0.1));  // ratio 0.5 > coin
  EXPECT_EQ(acc.source, DecisionSource::kSdAccept);
  EXPECT_FALSE(acc.scored);
  EXPECT_EQ(scorer->calls.load(), 0);
  const auto over = policy.decide(fx.position(0.2, 0.4, 0.9));
  EXPECT_EQ(over.source, DecisionSource::kPadOverride);
  EXPECT_TRUE(over.scored);
  EXPECT_EQ(scorer->calls.load(), 1);
}

TEST(PadPolicy, FloorBeatsClassifier) {
  Fixture fx;
  const PadPolicy policy(std::make_shared<ConstantScorer>(0.0), GateConfig{1.0, 1e-4});
  const auto d = policy.decide(fx.position(9e-5, 0.4, 0.9));
  EXPECT_EQ(d.decision, Decision::kReject);
  EXPECT_EQ(d.source, DecisionSource::kSdReject);
}

TEST(PadPolicy, ScorerFailureIsConservativeReject) {
  Fixture fx;
  const PadPolicy policy(std::make_shared<ThrowingScorer>(), GateConfig{1.0, 1e-4});
  testing::internal::CaptureStderr();
  const auto d = policy.decide(fx.position(0.2, 0.4, 0.9));
  const std::string log = testing::internal::GetCapturedStderr();
  EXPECT_EQ(d.decision, Decision::kReject);
  EXPECT_NE(log.find("classifier unavailable"), std::string::npos);
}

TEST(PadPolicy, MissingModelIsConservativeReject) {
  Fixture fx;
  PositionInput in = fx.position(0.2, 0.4, 0.9);
  in.target = nullptr;
  const PadPolicy policy(std::make_shared<ConstantScorer>(0.0), GateConfig{1.0, 1e-4});
  testing::internal::CaptureStderr();
  EXPECT_EQ(policy.decide(in).decision, Decision::kReject);
  testing::internal::GetCapturedStderr();
}

TEST(PadPolicy, VerificationContinuesAfterOverrideAndKeepsBonus) {
  SyntheticTaskSpec spec;
  spec.vocab_size = 6;
  spec.perturbation = 0.9;
  spec.seed = 12;
  const SyntheticPair p = make_synthetic_pair(spec);
  const PadPolicy always(std::make_shared<ConstantScorer>(0.0), GateConfig{1.0, 0.0});
  Rng rng(4);
  bool saw_override_then_more = false;
  for (int trial = 0; trial < 200 && !saw_override_then_more; ++trial) {
    const DraftBlock b = propose_block(*p.draft, TokenSeq{1}, 4, GenerationParams{}, rng);
    const VerifyOutcome o = verify_block(*p.target, b, always, GenerationParams{}, rng, 1);
    // Floor 0 and score 0 accept everything: the whole block stands.
    EXPECT_EQ(o.accepted_len, o.block_len);
    EXPECT_EQ(o.got_bonus, b.tokens.back() != kEos);
    for (std::size_t i = 0; i + 1 < o.records.size(); ++i) {
      saw_override_then_more |= o.records[i].source == DecisionSource::kPadOverride;
    }
  }
  EXPECT_TRUE(saw_override_then_more);
}

TEST(OracleScorer, PureFunctionOfPosition) {
  SyntheticTaskSpec spec;
  spec.vocab_size = 3;
  spec.seed = 5;
  const SyntheticPair p = make_synthetic_pair(spec);
  PivotOracleConfig cfg;
  cfg.params.max_len = 5;
  const UtilityFn u = make_utility(spec.utility, 3);
  const OracleScorer scorer(u, cfg, 9);
  const Distribution dist = p.target->next_distribution(TokenSeq{1});
  const TokenSeq prompt = {1};
  PositionInput in;
  in.prompt = prompt;
  in.target_dist = &dist;
  in.target = p.target.get();
  Rng rng(0);
  for (TokenId c = 0; c < 3; ++c) {
    in.candidate = c;
    const double s = scorer.score(in, FeatureVector{});
    EXPECT_EQ(s, scorer.score(in, FeatureVector{}));
    EXPECT_EQ(s == 1.0, is_pivot_oracle(*p.target, prompt, {}, c, cfg, u, rng));
  }
}
