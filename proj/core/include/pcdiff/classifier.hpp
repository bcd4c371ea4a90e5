#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pcdiff/adamw.hpp"
#include "pcdiff/data.hpp"
#include "pcdiff/mlp.hpp"
#include "pcdiff/rng.hpp"
#include "pcdiff/schedule.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// Logits are clamped to [-kLogitClamp, kLogitClamp] before the sigmoid so
/// that log S and log(1 - S) stay finite.
inline constexpr double kLogitClamp = 30.0;

/// Maps a sample to a preference score in (0, 1) through a one-logit MLP.
///
/// When time-conditioned the trunk input is [x | time_features(t, horizon)];
/// otherwise the trunk sees x alone and any timestep argument is ignored.
struct PreferenceClassifier {
  PreferenceClassifier() = default;
  PreferenceClassifier(Mlp trunk, std::size_t data_dim, bool time_conditioned, int horizon);

  Mlp trunk;
  std::size_t data_dim = 0;
  bool time_conditioned = true;
  /// Diffusion step count T used to scale time features.
  int horizon = 0;
};

PreferenceClassifier make_preference_classifier(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                                bool time_conditioned, int horizon, RngStream& rng);

/// Classifier whose trunk is all zeros: score 0.5 everywhere.
PreferenceClassifier constant_classifier(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                         bool time_conditioned, int horizon);

/// Timestep at which an x_{t-1} argument is scored. There are no t = 0 time
/// features, so x_0 is scored with the t = 1 features.
constexpr int scoring_time(int t) noexcept { return t < 1 ? 1 : t; }

/// Raw (unclamped) trunk logit for a single sample x of shape [d].
double classifier_logit(const PreferenceClassifier& clf, const Tensor& x, int t);
double score(const PreferenceClassifier& clf, const Tensor& x, int t);
double log_score(const PreferenceClassifier& clf, const Tensor& x, int t);

struct LogScoreGradient {
  Tensor grad;
  /// Logit reached the clamp; grad is the zero gradient of the clamped constant.
  bool saturated = false;
};

/// d/dx log S(x) = (1 - S) d/dx logit, or zero inside the clamp region.
LogScoreGradient log_score_grad(const PreferenceClassifier& clf, const Tensor& x, int t);

double sigmoid(double z) noexcept;
/// Numerically stable log(sigmoid(z)).
double log_sigmoid(double z) noexcept;

struct PcLossConfig {
  double beta = 0.1;
  /// Multiplier in beta * T; must equal the schedule's T.
  int T = 50;
};

/// (x_t, x_{t-1}) for both sides of one preference pair, sharing t.
struct NoisedTuple {
  Tensor x_t_w;
  Tensor x_tm1_w;
  Tensor x_t_l;
  Tensor x_tm1_l;
  int t = 1;
};

/// The four log-scores one tuple contributes to the loss.
struct TupleLogScores {
  double w_prev = 0.0;
  double w_t = 0.0;
  double l_prev = 0.0;
  double l_t = 0.0;
};

std::vector<TupleLogScores> tuple_log_scores(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch);

/// beta T [(log S(x_{t-1}^w) - log S(x_t^w)) - (log S(x_{t-1}^l) - log S(x_t^l))].
double pc_margin(const TupleLogScores& s, const PcLossConfig& cfg) noexcept;

/// Mean of -log sigmoid(margin) over precomputed log-scores.
double pc_loss_from_log_scores(std::span<const TupleLogScores> scores, const PcLossConfig& cfg);

/// Reference-free preference loss over a nonempty batch of tuples.
double pc_loss(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch, const PcLossConfig& cfg);

struct PcLossGradient {
  double loss = 0.0;
  /// Gradient with respect to clf.trunk.parameters().
  std::vector<double> params;
};

PcLossGradient pc_loss_grad(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch,
                            const PcLossConfig& cfg);

/// Builds a tuple from a clean pair: q_joint_pair on each side at the same t.
/// With shared_noise the loser reuses the winner's noise draws.
NoisedTuple make_noised_tuple(const PreferencePair& pair, int t, RngStream& rng, const NoiseSchedule& sched,
                              bool shared_noise = false);

struct ClassifierTrainOptions {
  std::int64_t steps = 2000;
  std::size_t batch = 64;
  double warmup_fraction = 0.05;
  bool shared_noise = false;
  /// Pin every tuple to this t instead of drawing t ~ U{1..T}.
  std::optional<int> fixed_t;
};

/// Minimizes pc_loss with AdamW; returns the per-step loss.
std::vector<double> train_classifier(PreferenceClassifier& clf, const PreferencePairSet& pairs,
                                     const NoiseSchedule& sched, const PcLossConfig& cfg, AdamwState& opt,
                                     const ClassifierTrainOptions& options, RngStream& rng);

}  // namespace pcdiff
