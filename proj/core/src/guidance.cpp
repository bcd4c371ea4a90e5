#include "pcdiff/guidance.hpp"

#include <cmath>
#include <stdexcept>

#include "pcdiff/parallel.hpp"

namespace pcdiff {

void GuidanceConfig::validate() const {
  if (!std::isfinite(gamma) || gamma < 0.0) throw std::invalid_argument("guidance: gamma must be finite and >= 0");
  if (M < 0) throw std::invalid_argument("guidance: M must be >= 0");
  if (uncapped_limit < 1) throw std::invalid_argument("guidance: uncapped_limit must be >= 1");
}

std::string_view to_string(AcceptedBy a) noexcept {
  switch (a) {
    case AcceptedBy::first_try:
      return "first_try";
    case AcceptedBy::z_resample:
      return "z_resample";
    case AcceptedBy::cap_exhausted:
      return "cap_exhausted";
  }
  return "unknown";
}

Tensor guided_step(const Tensor& x_t, int t, const DiffusionModel& model, const PreferenceClassifier& clf,
                   const GuidanceConfig& cfg, RngStream& rng) {
  if (t < 1 || t > model.schedule.T()) throw std::invalid_argument("guided_step: timestep out of range");
  Tensor out = ddpm_step(x_t, t, model, rng);
  if (cfg.gamma == 0.0) return out;
  const LogScoreGradient g = log_score_grad(clf, x_t, t);
  const double coef = cfg.gamma * model.schedule.sigma2(t);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += coef * g.grad[i];
  return out;
}

Tensor ddim_inverse_step(const Tensor& x_tm1, int t, const DiffusionModel& model) {
  const NoiseSchedule& s = model.schedule;
  if (t < 1 || t > s.T()) throw std::invalid_argument("ddim_inverse_step: timestep out of range");
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const double scale = std::sqrt(ab_t / ab_prev);
  const double eps_coef = std::sqrt(1.0 - ab_t) - std::sqrt(ab_t * (1.0 - ab_prev) / ab_prev);
  const Tensor eps = predict_noise(model, x_tm1, scoring_time(t - 1));
  Tensor out(x_tm1.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * x_tm1[i] + eps_coef * eps[i];
  return out;
}

Tensor ddim_step(const Tensor& x_t, int t, const DiffusionModel& model) {
  const NoiseSchedule& s = model.schedule;
  if (t < 1 || t > s.T()) throw std::invalid_argument("ddim_step: timestep out of range");
  const double ab_t = s.alpha_bar(t);
  const double ab_prev = s.alpha_bar(t - 1);
  const Tensor eps = predict_noise(model, x_t, t);
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x0 = (x_t[i] - std::sqrt(1.0 - ab_t) * eps[i]) / std::sqrt(ab_t);
    out[i] = std::sqrt(ab_prev) * x0 + std::sqrt(1.0 - ab_prev) * eps[i];
  }
  return out;
}

Tensor constrained_sample_one(const DiffusionModel& model, const PreferenceClassifier& clf,
                              const GuidanceConfig& cfg, RngStream& rng, SamplerTrace* trace) {
  cfg.validate();
  if (clf.data_dim != model.data_dim) throw std::invalid_argument("constrained_sample: classifier/model dimension mismatch");
  const int T = model.schedule.T();
  const int limit = cfg.policy == RejectionPolicy::capped ? cfg.M : cfg.uncapped_limit;
  if (trace) {
    trace->clear();
    trace->reserve(static_cast<std::size_t>(T));
  }

  Tensor x = rng.gaussian({model.data_dim});
  for (int t = T; t >= 1; --t) {
    StepRecord rec;
    rec.t = t;
    Tensor x_t = x;
    Tensor candidate = guided_step(x_t, t, model, clf, cfg, rng);
    if (cfg.rejection_enabled) {
      double before = score(clf, x_t, t);
      rec.score_entry = before;
      double after = score(clf, candidate, scoring_time(t - 1));
      int m = 0;
      while (after < before && m < limit) {
        x_t = ddim_inverse_step(candidate, t, model);
        ++rec.inversions;
        candidate = guided_step(x_t, t, model, clf, cfg, rng);
        ++m;
        before = score(clf, x_t, t);
        after = score(clf, candidate, scoring_time(t - 1));
      }
      if (after < before && cfg.policy == RejectionPolicy::uncapped) {
        throw std::runtime_error("constrained_sample: uncapped rejection exceeded its runaway limit");
      }
      rec.resamples = m;
      rec.score_before = before;
      rec.score_after = after;
      if (after >= before) {
        rec.accepted_by = m == 0 ? AcceptedBy::first_try : AcceptedBy::z_resample;
      } else {
        rec.accepted_by = AcceptedBy::cap_exhausted;
      }
    } else if (trace) {
      rec.score_before = rec.score_entry = score(clf, x_t, t);
      rec.score_after = score(clf, candidate, scoring_time(t - 1));
    }
    if (trace) trace->push_back(rec);
    x = std::move(candidate);
  }
  return x;
}

ConstrainedResult constrained_sample(const DiffusionModel& model, const PreferenceClassifier& clf,
                                     const GuidanceConfig& cfg, std::uint64_t seed, std::size_t n_samples,
                                     unsigned threads) {
  if (n_samples == 0) throw std::invalid_argument("constrained_sample: n_samples must be >= 1");
  cfg.validate();
  ConstrainedResult out{Tensor({n_samples, model.data_dim}), std::vector<SamplerTrace>(n_samples)};
  parallel_for(n_samples, threads, [&](std::size_t i) {
    RngStream rng = RngStream::derived(seed, i);
    const Tensor x = constrained_sample_one(model, clf, cfg, rng, &out.traces[i]);
    std::copy(x.values().begin(), x.values().end(), out.samples.row(i).begin());
  });
  return out;
}

}  // namespace pcdiff
