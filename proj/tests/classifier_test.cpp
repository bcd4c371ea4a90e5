#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "pcdiff/classifier.hpp"
#include "pcdiff/data.hpp"
#include "pcdiff/schedule.hpp"
#include "test_util.hpp"

namespace pcdiff {
namespace {

using testing::central_difference;
using testing::relative_error;

const double kLog2 = std::numbers::ln2;

/// 1D classifier whose logit is a * x + b, no time input.
PreferenceClassifier linear_classifier(double a, double b) {
  Mlp trunk({1, 1});
  trunk.weights(0)[0] = a;
  trunk.biases(0)[0] = b;
  return PreferenceClassifier(std::move(trunk), 1, false, 50);
}

std::vector<NoisedTuple> random_batch(RngStream& rng, std::size_t n, std::size_t d, const NoiseSchedule& sched) {
  std::vector<NoisedTuple> batch;
  for (std::size_t k = 0; k < n; ++k) {
    const PreferencePair pair{rng.gaussian({d}), rng.gaussian({d})};
    batch.push_back(make_noised_tuple(pair, static_cast<int>(rng.uniform_int(1, sched.T())), rng, sched));
  }
  return batch;
}

NoisedTuple swapped(const NoisedTuple& t) { return {t.x_t_l, t.x_tm1_l, t.x_t_w, t.x_tm1_w, t.t}; }

TEST(Score, ConstantClassifierIsOneHalf) {
  const auto clf = constant_classifier(2, {8, 8}, true, 50);
  RngStream rng(1);
  for (int k = 0; k < 10; ++k) {
    const Tensor x = rng.gaussian({2});
    EXPECT_EQ(score(clf, x, 10), 0.5);
    const auto g = log_score_grad(clf, x, 10);
    for (double v : g.grad.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Score, LinearLogitHandValue) {
  const auto clf = linear_classifier(2.0, 0.0);
  // sigmoid(2), 20 significant digits.
  EXPECT_NEAR(score(clf, Tensor::from({1.0}), 1), 0.88079707797788244406, 1e-15);
}

TEST(Score, StaysInsideOpenUnitIntervalUnderClamp) {
  const auto clf = linear_classifier(1e6, 0.0);
  for (double x : {-1e3, -1.0, 1.0, 1e3}) {
    const double s = score(clf, Tensor::from({x}), 1);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_TRUE(std::isfinite(log_score(clf, Tensor::from({x}), 1)));
  }
}

TEST(Score, SaturatedGradientIsZeroAndFlagged) {
  const auto clf = linear_classifier(100.0, 0.0);
  const auto g = log_score_grad(clf, Tensor::from({-1.0}), 1);
  EXPECT_TRUE(g.saturated);
  EXPECT_EQ(g.grad[0], 0.0);
  EXPECT_FALSE(log_score_grad(clf, Tensor::from({0.01}), 1).saturated);
}

TEST(Score, DimensionMismatchThrows) {
  RngStream rng(2);
  const auto clf = make_preference_classifier(2, {4}, true, 50, rng);
  EXPECT_THROW(score(clf, Tensor::from({1.0, 2.0, 3.0}), 5), std::invalid_argument);
  EXPECT_THROW(log_score_grad(clf, Tensor::from({1.0}), 5), std::invalid_argument);
}

TEST(Score, TimeConditioningMatters) {
  RngStream rng(4);
  const auto clf = make_preference_classifier(2, {8}, true, 50, rng);
  const Tensor x = rng.gaussian({2});
  EXPECT_NE(score(clf, x, 1), score(clf, x, 40));
  const auto flat = make_preference_classifier(2, {8}, false, 50, rng);
  EXPECT_EQ(score(flat, x, 1), score(flat, x, 40));
}

TEST(LogScoreGrad, LinearClosedForm) {
  EXPECT_DOUBLE_EQ(log_score_grad(linear_classifier(1.0, 0.0), Tensor::from({0.0}), 1).grad[0], 0.5);
  const double a = -1.5;
  const double b = 0.3;
  const double x = 0.7;
  const double expect = a * (1.0 - 1.0 / (1.0 + std::exp(-(a * x + b))));
  EXPECT_NEAR(log_score_grad(linear_classifier(a, b), Tensor::from({x}), 1).grad[0], expect, 1e-15);
}

TEST(LogScoreGrad, FiniteDifferences2x16x1) {
  RngStream rng(31);
  const auto clf = make_preference_classifier(2, {16}, true, 50, rng);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    Tensor x = rng.gaussian({2});
    const int t = static_cast<int>(rng.uniform_int(1, 50));
    const auto g = log_score_grad(clf, x, t);
    ASSERT_FALSE(g.saturated);
    const auto f = [&] { return log_score(clf, x, t); };
    for (std::size_t i = 0; i < 2; ++i) worst = std::max(worst, relative_error(g.grad[i], central_difference(f, x[i])));
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(PcLoss, IdenticalWinnerAndLoserGivesLog2) {
  RngStream rng(5);
  const auto clf = make_preference_classifier(2, {8, 8}, true, 50, rng);
  const NoiseSchedule sched = make_schedule(50, 1e-4, 0.02);
  std::vector<NoisedTuple> batch;
  for (int k = 0; k < 8; ++k) {
    const Tensor x0 = rng.gaussian({2});
    const NoisedTuple t = make_noised_tuple({x0, x0}, static_cast<int>(rng.uniform_int(1, 50)), rng, sched, true);
    EXPECT_EQ(t.x_t_w, t.x_t_l);
    EXPECT_EQ(t.x_tm1_w, t.x_tm1_l);
    batch.push_back(t);
  }
  EXPECT_NEAR(pc_loss(clf, batch, PcLossConfig{0.1, 50}), kLog2, 1e-15);
}

TEST(PcLoss, ConstantClassifierGivesLog2) {
  const auto clf = constant_classifier(2, {8}, true, 50);
  RngStream rng(6);
  const auto batch = random_batch(rng, 32, 2, make_schedule(50, 1e-4, 0.02));
  EXPECT_NEAR(pc_loss(clf, batch, PcLossConfig{0.1, 50}), kLog2, 1e-12);
}

TEST(PcLoss, SwapSymmetry) {
  RngStream rng(7);
  const NoiseSchedule sched = make_schedule(50, 1e-4, 0.02);
  const PcLossConfig cfg{0.1, 50};
  for (int k = 0; k < 100; ++k) {
    const auto clf = make_preference_classifier(2, {8}, true, 50, rng);
    const auto batch = random_batch(rng, 4, 2, sched);
    std::vector<NoisedTuple> swap;
    for (const auto& t : batch) swap.push_back(swapped(t));
    // Per tuple, -log s(z) - log s(-z) >= 2 log 2 with equality iff z == 0.
    const auto scores = tuple_log_scores(clf, batch);
    const auto swapped_scores = tuple_log_scores(clf, swap);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double z = pc_margin(scores[i], cfg);
      EXPECT_NEAR(pc_margin(swapped_scores[i], cfg), -z, 1e-13);
      const double pair_loss = -log_sigmoid(z) - log_sigmoid(-z);
      if (z == 0.0) {
        EXPECT_DOUBLE_EQ(pair_loss, 2 * kLog2);
      } else {
        EXPECT_GT(pair_loss, 2 * kLog2);
      }
    }
    EXPECT_GE(pc_loss(clf, batch, cfg) + pc_loss(clf, swap, cfg), 2 * kLog2);
  }
}

TEST(PcLoss, DependsOnlyOnTheFourLogScores) {
  RngStream rng(8);
  const auto clf = make_preference_classifier(2, {16, 16}, true, 50, rng);
  const auto batch = random_batch(rng, 16, 2, make_schedule(50, 1e-4, 0.02));
  const PcLossConfig cfg{0.1, 50};
  const auto scores = tuple_log_scores(clf, batch);
  EXPECT_NEAR(pc_loss(clf, batch, cfg), pc_loss_from_log_scores(scores, cfg), 1e-15);
}

TEST(PcLoss, PreviousStepScoredOneStepEarlier) {
  RngStream rng(9);
  const auto clf = make_preference_classifier(2, {8}, true, 50, rng);
  const auto batch = random_batch(rng, 6, 2, make_schedule(50, 1e-4, 0.02));
  const auto scores = tuple_log_scores(clf, batch);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int t = batch[i].t;
    EXPECT_EQ(scores[i].w_t, log_score(clf, batch[i].x_t_w, t));
    EXPECT_EQ(scores[i].w_prev, log_score(clf, batch[i].x_tm1_w, scoring_time(t - 1)));
    EXPECT_EQ(scores[i].l_prev, log_score(clf, batch[i].x_tm1_l, scoring_time(t - 1)));
  }
  EXPECT_EQ(scoring_time(0), 1);
}

TEST(PcLoss, MarginHandComputed) {
  const TupleLogScores s{-0.1, -0.4, -0.7, -0.2};
  // beta T [(w_prev - w_t) - (l_prev - l_t)] = 5 * (0.3 + 0.5)
  EXPECT_NEAR(pc_margin(s, PcLossConfig{0.1, 50}), 4.0, 1e-14);
}

TEST(PcLoss, EmptyBatchThrows) {
  const auto clf = constant_classifier(2, {8}, true, 50);
  EXPECT_THROW(pc_loss(clf, std::vector<NoisedTuple>{}, PcLossConfig{}), std::invalid_argument);
}

TEST(PcLossGrad, MatchesFiniteDifferences) {
  RngStream rng(10);
  auto clf = make_preference_classifier(2, {6, 6}, true, 50, rng);
  const auto batch = random_batch(rng, 5, 2, make_schedule(50, 1e-4, 0.02));
  const PcLossConfig cfg{0.1, 50};
  const PcLossGradient g = pc_loss_grad(clf, batch, cfg);
  EXPECT_NEAR(g.loss, pc_loss(clf, batch, cfg), 1e-14);
  auto params = clf.trunk.parameters();
  const auto f = [&] { return pc_loss(clf, batch, cfg); };
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_LE(relative_error(g.params[i], central_difference(f, params[i])), 1e-5) << "param " << i;
  }
}

TEST(TrainClassifier, EmptyPairsThrow) {
  RngStream rng(1);
  auto clf = make_preference_classifier(2, {4}, true, 50, rng);
  AdamwState opt(clf.trunk.parameter_count(), AdamwOptions{});
  EXPECT_THROW(train_classifier(clf, PreferencePairSet{}, make_schedule(50, 1e-4, 0.02), PcLossConfig{}, opt,
                                ClassifierTrainOptions{}, rng),
               std::invalid_argument);
}

PreferencePairSet identical_pairs(RngStream& rng, std::size_t n) {
  PreferencePairSet set;
  for (std::size_t k = 0; k < n; ++k) {
    const Tensor x = rng.gaussian({2});
    set.pairs.push_back({x, x});
  }
  return set;
}

TEST(TrainClassifier, DegeneratePairsPinLossAtLog2WithSharedNoise) {
  RngStream rng(12);
  const auto pairs = identical_pairs(rng, 200);
  auto clf = make_preference_classifier(2, {8, 8}, true, 50, rng);
  AdamwState opt(clf.trunk.parameter_count(), AdamwOptions{1e-3});
  ClassifierTrainOptions o;
  o.steps = 200;
  o.shared_noise = true;
  const auto losses = train_classifier(clf, pairs, make_schedule(50, 1e-4, 0.02), PcLossConfig{}, opt, o, rng);
  for (double l : losses) EXPECT_NEAR(l, kLog2, 1e-12);
}

TEST(TrainClassifier, DegeneratePairsStayNearLog2WithIndependentNoise) {
  // Independent noise makes the two noised copies differ, so individual
  // batches fluctuate around log 2 but nothing is learnable on average.
  RngStream rng(13);
  const auto pairs = identical_pairs(rng, 200);
  auto clf = make_preference_classifier(2, {8, 8}, true, 50, rng);
  AdamwState opt(clf.trunk.parameter_count(), AdamwOptions{1e-4});
  ClassifierTrainOptions o;
  o.steps = 400;
  const auto losses = train_classifier(clf, pairs, make_schedule(50, 1e-4, 0.02), PcLossConfig{}, opt, o, rng);
  const double tail = std::accumulate(losses.end() - 40, losses.end(), 0.0) / 40.0;
  EXPECT_GE(tail, kLog2 - 1e-3);
}

TEST(TrainClassifier, SeparableDataOrdersScores) {
  // At t = 1 the loss only sees log S(x_0) - log S(x_1); denoising moves a
  // point outward by (1 - sqrt(alpha_1)) |x_0| ~ 5e-5 against noise of
  // std 0.01, so the ordering needs the full 2,000-step budget.
  RngStream rng(14);
  PreferencePairSet pairs;
  for (int k = 0; k < 500; ++k) {
    pairs.pairs.push_back({Tensor::from({1.0 + 0.1 * rng.gaussian()}), Tensor::from({-1.0 + 0.1 * rng.gaussian()})});
  }
  auto clf = make_preference_classifier(1, {8}, true, 50, rng);
  AdamwState opt(clf.trunk.parameter_count(), AdamwOptions{1e-3});
  ClassifierTrainOptions o;
  o.steps = 2000;
  o.fixed_t = 1;
  train_classifier(clf, pairs, make_schedule(50, 1e-4, 0.02), PcLossConfig{}, opt, o, rng);
  EXPECT_GT(score(clf, Tensor::from({1.0}), 1), score(clf, Tensor::from({-1.0}), 1));
}

TEST(TrainClassifier, DefaultDeskRunBeatsLog2) {
  RngStream rng(7);
  const ToyDataset ds = make_mixture(two_mode_spec(2), 10000, rng);
  const auto reward = GroundTruthReward::mode_indicator(ds.spec, 1);
  const auto pairs = make_preference_pairs(ds.points, reward, 4000, rng);
  auto clf = make_preference_classifier(2, {32, 32}, true, 50, rng);
  AdamwState opt(clf.trunk.parameter_count(), AdamwOptions{1e-4});
  const auto losses = train_classifier(clf, pairs, make_schedule(50, 1e-4, 0.02), PcLossConfig{0.1, 50}, opt,
                                       ClassifierTrainOptions{}, rng);
  ASSERT_EQ(losses.size(), 2000u);
  const double tail = std::accumulate(losses.end() - 200, losses.end(), 0.0) / 200.0;
  EXPECT_LT(tail, kLog2);
  // Trained scores favour the preferred (+2) mode at the clean end.
  EXPECT_GT(score(clf, Tensor::from({2.0, 0.0}), 1), score(clf, Tensor::from({-2.0, 0.0}), 1));
}

}  // namespace
}  // namespace pcdiff
