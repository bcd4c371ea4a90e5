#include "pcdiff/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pcdiff/diffusion.hpp"

namespace pcdiff {

namespace {

std::size_t trunk_input_width(std::size_t data_dim, bool time_conditioned) {
  return data_dim + (time_conditioned ? kTimeFeatureWidth : 0);
}

void write_input_row(const PreferenceClassifier& clf, std::span<const double> x, int t, std::span<double> dst) {
  std::copy(x.begin(), x.end(), dst.begin());
  if (clf.time_conditioned) {
    if (t < 1 || t > clf.horizon) {
      throw std::invalid_argument("classifier: timestep " + std::to_string(t) + " outside [1, " +
                                  std::to_string(clf.horizon) + "]");
    }
    const auto f = time_features(t, clf.horizon);
    std::copy(f.begin(), f.end(), dst.begin() + static_cast<std::ptrdiff_t>(x.size()));
  }
}

Tensor single_input(const PreferenceClassifier& clf, const Tensor& x, int t) {
  if (x.size() != clf.data_dim) {
    throw std::invalid_argument("classifier: sample dimension " + std::to_string(x.size()) + " != " +
                                std::to_string(clf.data_dim));
  }
  Tensor in({1, clf.trunk.input_dim()});
  write_input_row(clf, x.values(), t, in.row(0));
  return in;
}

double clamp_logit(double z) { return std::clamp(z, -kLogitClamp, kLogitClamp); }
bool saturated(double z) { return std::abs(z) >= kLogitClamp; }

}  // namespace

PreferenceClassifier::PreferenceClassifier(Mlp t, std::size_t d, bool tc, int h)
    : trunk(std::move(t)), data_dim(d), time_conditioned(tc), horizon(h) {
  if (d == 0) throw std::invalid_argument("classifier: data_dim must be >= 1");
  if (trunk.input_dim() != trunk_input_width(d, tc) || trunk.output_dim() != 1) {
    throw std::invalid_argument("classifier: trunk widths do not match data_dim / time conditioning");
  }
  if (tc && h < 1) throw std::invalid_argument("classifier: time-conditioned classifier needs horizon >= 1");
}

PreferenceClassifier make_preference_classifier(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                                bool time_conditioned, int horizon, RngStream& rng) {
  std::vector<std::size_t> sizes{trunk_input_width(data_dim, time_conditioned)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return PreferenceClassifier(Mlp::glorot(std::move(sizes), rng), data_dim, time_conditioned, horizon);
}

PreferenceClassifier constant_classifier(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                         bool time_conditioned, int horizon) {
  std::vector<std::size_t> sizes{trunk_input_width(data_dim, time_conditioned)};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return PreferenceClassifier(Mlp(std::move(sizes)), data_dim, time_conditioned, horizon);
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept {
  if (z >= 0.0) return -std::log1p(std::exp(-z));
  return z - std::log1p(std::exp(z));
}

double classifier_logit(const PreferenceClassifier& clf, const Tensor& x, int t) {
  return mlp_forward(clf.trunk, single_input(clf, x, t))[0];
}

double score(const PreferenceClassifier& clf, const Tensor& x, int t) {
  return sigmoid(clamp_logit(classifier_logit(clf, x, t)));
}

double log_score(const PreferenceClassifier& clf, const Tensor& x, int t) {
  return log_sigmoid(clamp_logit(classifier_logit(clf, x, t)));
}

LogScoreGradient log_score_grad(const PreferenceClassifier& clf, const Tensor& x, int t) {
  const MlpTape tape(clf.trunk, single_input(clf, x, t));
  const double z = tape.output()[0];
  LogScoreGradient out{Tensor(x.shape()), saturated(z)};
  if (out.saturated) return out;
  const double dlog = 1.0 - sigmoid(z);
  const MlpGradients g = tape.backward(Tensor({1, 1}, {dlog}));
  for (std::size_t j = 0; j < clf.data_dim; ++j) out.grad[j] = g.input[j];
  return out;
}

namespace {

// Rows 4i..4i+3 hold (w_prev, w_t, l_prev, l_t) of tuple i.
Tensor stacked_inputs(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch) {
  if (batch.empty()) throw std::invalid_argument("pc_loss: empty batch");
  Tensor in({4 * batch.size(), clf.trunk.input_dim()});
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const NoisedTuple& tup = batch[i];
    const Tensor* xs[4] = {&tup.x_tm1_w, &tup.x_t_w, &tup.x_tm1_l, &tup.x_t_l};
    const int ts[4] = {scoring_time(tup.t - 1), tup.t, scoring_time(tup.t - 1), tup.t};
    for (std::size_t k = 0; k < 4; ++k) {
      if (xs[k]->size() != clf.data_dim) throw std::invalid_argument("pc_loss: tuple dimension mismatch");
      write_input_row(clf, xs[k]->values(), ts[k], in.row(4 * i + k));
    }
  }
  return in;
}

TupleLogScores gather(const Tensor& logits, std::size_t i) {
  return {log_sigmoid(clamp_logit(logits[4 * i])), log_sigmoid(clamp_logit(logits[4 * i + 1])),
          log_sigmoid(clamp_logit(logits[4 * i + 2])), log_sigmoid(clamp_logit(logits[4 * i + 3]))};
}

void check_config(const PcLossConfig& cfg) {
  if (!(cfg.beta > 0.0) || cfg.T < 1) throw std::invalid_argument("pc_loss: need beta > 0 and T >= 1");
}

}  // namespace

std::vector<TupleLogScores> tuple_log_scores(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch) {
  const Tensor logits = mlp_forward(clf.trunk, stacked_inputs(clf, batch));
  std::vector<TupleLogScores> out(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) out[i] = gather(logits, i);
  return out;
}

double pc_margin(const TupleLogScores& s, const PcLossConfig& cfg) noexcept {
  const double bt = cfg.beta * static_cast<double>(cfg.T);
  return bt * (s.w_prev - s.w_t) - bt * (s.l_prev - s.l_t);
}

double pc_loss_from_log_scores(std::span<const TupleLogScores> scores, const PcLossConfig& cfg) {
  check_config(cfg);
  if (scores.empty()) throw std::invalid_argument("pc_loss: empty batch");
  double acc = 0.0;
  for (const auto& s : scores) acc -= log_sigmoid(pc_margin(s, cfg));
  return acc / static_cast<double>(scores.size());
}

double pc_loss(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch, const PcLossConfig& cfg) {
  check_config(cfg);
  return pc_loss_from_log_scores(tuple_log_scores(clf, batch), cfg);
}

PcLossGradient pc_loss_grad(const PreferenceClassifier& clf, std::span<const NoisedTuple> batch,
                            const PcLossConfig& cfg) {
  check_config(cfg);
  const MlpTape tape(clf.trunk, stacked_inputs(clf, batch));
  const Tensor& logits = tape.output();
  const double n = static_cast<double>(batch.size());
  const double bt = cfg.beta * static_cast<double>(cfg.T);
  const double signs[4] = {bt, -bt, -bt, bt};

  PcLossGradient out;
  Tensor upstream(logits.shape());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double z = pc_margin(gather(logits, i), cfg);
    out.loss -= log_sigmoid(z);
    // d(-log sigmoid z)/dz = sigmoid(z) - 1
    const double dz = (sigmoid(z) - 1.0) / n;
    for (std::size_t k = 0; k < 4; ++k) {
      const double logit = logits[4 * i + k];
      const double dlog = saturated(logit) ? 0.0 : 1.0 - sigmoid(logit);
      upstream[4 * i + k] = dz * signs[k] * dlog;
    }
  }
  out.loss /= n;
  out.params = tape.backward(upstream).params;
  return out;
}

NoisedTuple make_noised_tuple(const PreferencePair& pair, int t, RngStream& rng, const NoiseSchedule& sched,
                              bool shared_noise) {
  if (pair.winner.shape() != pair.loser.shape()) throw std::invalid_argument("noised tuple: winner/loser shapes differ");
  NoisedTuple tup;
  tup.t = t;
  if (shared_noise) {
    const std::string state = rng.serialize();
    JointPair w = q_joint_pair(pair.winner, t, rng, sched);
    RngStream replay = RngStream::deserialize(state);
    JointPair l = q_joint_pair(pair.loser, t, replay, sched);
    tup.x_t_w = std::move(w.x_t);
    tup.x_tm1_w = std::move(w.x_prev);
    tup.x_t_l = std::move(l.x_t);
    tup.x_tm1_l = std::move(l.x_prev);
    return tup;
  }
  JointPair w = q_joint_pair(pair.winner, t, rng, sched);
  JointPair l = q_joint_pair(pair.loser, t, rng, sched);
  tup.x_t_w = std::move(w.x_t);
  tup.x_tm1_w = std::move(w.x_prev);
  tup.x_t_l = std::move(l.x_t);
  tup.x_tm1_l = std::move(l.x_prev);
  return tup;
}

std::vector<double> train_classifier(PreferenceClassifier& clf, const PreferencePairSet& pairs,
                                     const NoiseSchedule& sched, const PcLossConfig& cfg, AdamwState& opt,
                                     const ClassifierTrainOptions& options, RngStream& rng) {
  if (pairs.empty()) throw std::invalid_argument("train_classifier: empty preference pair set");
  if (pairs.dim() != clf.data_dim) throw std::invalid_argument("train_classifier: pair dimension mismatch");
  if (cfg.T != sched.T()) throw std::invalid_argument("train_classifier: loss T differs from schedule T");
  if (options.steps < 1 || options.batch < 1) throw std::invalid_argument("train_classifier: steps and batch must be >= 1");
  if (options.fixed_t && (*options.fixed_t < 1 || *options.fixed_t > sched.T())) {
    throw std::invalid_argument("train_classifier: fixed_t out of range");
  }
  if (opt.first_moment.size() != clf.trunk.parameter_count()) {
    throw std::invalid_argument("train_classifier: optimizer state does not match classifier parameters");
  }

  const WarmupSchedule warmup(options.steps, options.warmup_fraction);
  const auto last = static_cast<std::int64_t>(pairs.size()) - 1;
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(options.steps));
  std::vector<NoisedTuple> batch(options.batch);
  for (std::int64_t step = 0; step < options.steps; ++step) {
    for (auto& tup : batch) {
      const auto& pair = pairs.pairs[static_cast<std::size_t>(rng.uniform_int(0, last))];
      const int t = options.fixed_t ? *options.fixed_t : static_cast<int>(rng.uniform_int(1, sched.T()));
      tup = make_noised_tuple(pair, t, rng, sched, options.shared_noise);
    }
    const PcLossGradient g = pc_loss_grad(clf, batch, cfg);
    losses.push_back(g.loss);
    adamw_step(opt, clf.trunk.parameters(), g.params, warmup.scale(step));
  }
  return losses;
}

}  // namespace pcdiff
