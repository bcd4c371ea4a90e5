#include "pcdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pcdiff/parallel.hpp"

namespace pcdiff {

DiffusionModel::DiffusionModel(Mlp n, NoiseSchedule s, std::size_t d)
    : net(std::move(n)), schedule(std::move(s)), data_dim(d) {
  if (d == 0) throw std::invalid_argument("diffusion model: data_dim must be >= 1");
  if (net.input_dim() != d + kTimeFeatureWidth || net.output_dim() != d) {
    throw std::invalid_argument("diffusion model: network widths do not match data_dim " + std::to_string(d));
  }
}

DiffusionModel make_diffusion_model(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                    NoiseSchedule schedule, RngStream& rng) {
  std::vector<std::size_t> sizes{data_dim + kTimeFeatureWidth};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(data_dim);
  return DiffusionModel(Mlp::glorot(std::move(sizes), rng), std::move(schedule), data_dim);
}

Tensor with_time_features(const Tensor& x, std::span<const int> ts, int T) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (ts.size() != n) throw std::invalid_argument("with_time_features: one timestep per row required");
  const std::size_t w = d + kTimeFeatureWidth;
  Tensor out({n, w});
  for (std::size_t r = 0; r < n; ++r) {
    auto src = x.row(r);
    auto dst = out.row(r);
    std::copy(src.begin(), src.end(), dst.begin());
    const auto f = time_features(ts[r], T);
    std::copy(f.begin(), f.end(), dst.begin() + static_cast<std::ptrdiff_t>(d));
  }
  return out;
}

Tensor with_time_features(const Tensor& x, int t, int T) {
  std::vector<int> ts(x.rows(), t);
  return with_time_features(x, ts, T);
}

Tensor predict_noise(const DiffusionModel& model, const Tensor& x, int t) {
  if (x.cols() != model.data_dim) throw std::invalid_argument("predict_noise: dimension mismatch");
  const Tensor out = mlp_forward(model.net, with_time_features(x, t, model.schedule.T()));
  return x.rank() == 1 ? out.reshaped(x.shape()) : out;
}

Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T()) throw std::invalid_argument("q_sample: timestep out of range");
  if (eps.shape() != x0.shape()) throw std::invalid_argument("q_sample: eps shape differs from x0");
  const double ab = sched.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Tensor out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Tensor q_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& sched) {
  if (eps.shape() != x_prev.shape()) throw std::invalid_argument("q_step: eps shape differs from input");
  const double a = std::sqrt(sched.alpha(t));
  const double b = std::sqrt(sched.beta(t));
  Tensor out(x_prev.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x_prev[i] + b * eps[i];
  return out;
}

JointPair q_joint_pair(const Tensor& x0, int t, RngStream& rng, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T()) throw std::invalid_argument("q_joint_pair: timestep out of range");
  const Tensor eps_prev = rng.gaussian(x0.shape());
  const Tensor eps_step = rng.gaussian(x0.shape());
  JointPair pair;
  pair.x_prev = t == 1 ? x0 : q_sample(x0, t - 1, eps_prev, sched);
  pair.x_t = q_step(pair.x_prev, t, eps_step, sched);
  return pair;
}

Tensor ddpm_update(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& noise,
                   const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T()) throw std::invalid_argument("ddpm_step: timestep out of range");
  if (eps_pred.shape() != x_t.shape() || noise.shape() != x_t.shape()) {
    throw std::invalid_argument("ddpm_step: shape mismatch");
  }
  const double alpha = sched.alpha(t);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  const double eps_coef = (1.0 - alpha) / std::sqrt(1.0 - sched.alpha_bar(t));
  const double sigma = std::sqrt(sched.sigma2(t));
  Tensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = inv_sqrt_alpha * (x_t[i] - eps_coef * eps_pred[i]) + sigma * noise[i];
  }
  return out;
}

Tensor ddpm_step(const Tensor& x_t, int t, const DiffusionModel& model, RngStream& rng) {
  if (t < 1 || t > model.schedule.T()) throw std::invalid_argument("ddpm_step: timestep out of range");
  const Tensor eps_pred = predict_noise(model, x_t, t);
  const Tensor noise = rng.gaussian(x_t.shape());
  return ddpm_update(x_t, t, eps_pred, noise, model.schedule);
}

Tensor ddpm_sample_one(const DiffusionModel& model, RngStream& rng) {
  Tensor x = rng.gaussian({model.data_dim});
  for (int t = model.schedule.T(); t >= 1; --t) x = ddpm_step(x, t, model, rng);
  return x;
}

Tensor ddpm_sample(const DiffusionModel& model, std::uint64_t seed, std::size_t n, unsigned threads) {
  if (n == 0) throw std::invalid_argument("ddpm_sample: n must be >= 1");
  Tensor out({n, model.data_dim});
  parallel_for(n, threads, [&](std::size_t i) {
    RngStream rng = RngStream::derived(seed, i);
    const Tensor x = ddpm_sample_one(model, rng);
    std::copy(x.values().begin(), x.values().end(), out.row(i).begin());
  });
  return out;
}

DenoisingBatch make_denoising_batch(const Tensor& data, const NoiseSchedule& sched, std::size_t batch,
                                    RngStream& rng) {
  if (data.empty() || data.rank() != 2) throw std::invalid_argument("denoising batch: empty dataset");
  if (batch == 0) throw std::invalid_argument("denoising batch: batch must be >= 1");
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  DenoisingBatch out{Tensor({batch, d}), std::vector<int>(batch), Tensor({batch, d})};
  for (std::size_t b = 0; b < batch; ++b) {
    const auto idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
    const int t = static_cast<int>(rng.uniform_int(1, sched.T()));
    const Tensor eps = rng.gaussian({d});
    const Tensor xt = q_sample(data.row_tensor(idx), t, eps, sched);
    std::copy(xt.values().begin(), xt.values().end(), out.x_t.row(b).begin());
    std::copy(eps.values().begin(), eps.values().end(), out.eps.row(b).begin());
    out.ts[b] = t;
  }
  return out;
}

double denoising_loss(const Tensor& predicted, const Tensor& eps) {
  if (predicted.shape() != eps.shape()) throw std::invalid_argument("denoising_loss: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const double r = predicted[i] - eps[i];
    acc += r * r;
  }
  return acc / static_cast<double>(eps.size());
}

std::vector<double> train_ddpm(const Tensor& data, DiffusionModel& model, AdamwState& opt,
                               const TrainOptions& options, RngStream& rng) {
  if (data.empty() || data.rank() != 2 || data.rows() == 0) throw std::invalid_argument("train_ddpm: empty dataset");
  if (data.cols() != model.data_dim) throw std::invalid_argument("train_ddpm: data dimension mismatch");
  if (options.steps < 1 || options.batch < 1) throw std::invalid_argument("train_ddpm: steps and batch must be >= 1");
  if (opt.first_moment.size() != model.net.parameter_count()) {
    throw std::invalid_argument("train_ddpm: optimizer state does not match model parameters");
  }

  if (!(options.ema_decay >= 0.0 && options.ema_decay < 1.0)) {
    throw std::invalid_argument("train_ddpm: ema_decay must lie in [0, 1)");
  }

  const WarmupSchedule warmup(options.steps, options.warmup_fraction);
  std::vector<double> losses;
  losses.reserve(static_cast<std::size_t>(options.steps));
  std::vector<double> ema(model.net.parameters().begin(), model.net.parameters().end());
  for (std::int64_t step = 0; step < options.steps; ++step) {
    const DenoisingBatch b = make_denoising_batch(data, model.schedule, options.batch, rng);
    const MlpTape tape(model.net, with_time_features(b.x_t, b.ts, model.schedule.T()));
    const Tensor& pred = tape.output();
    losses.push_back(denoising_loss(pred, b.eps));

    Tensor upstream(pred.shape());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) upstream[i] = scale * (pred[i] - b.eps[i]);
    const MlpGradients g = tape.backward(upstream);
    adamw_step(opt, model.net.parameters(), g.params, warmup.scale(step));
    if (options.ema_decay > 0.0) {
      const auto p = model.net.parameters();
      for (std::size_t i = 0; i < ema.size(); ++i) ema[i] = options.ema_decay * ema[i] + (1.0 - options.ema_decay) * p[i];
    }
  }
  if (options.ema_decay > 0.0) std::copy(ema.begin(), ema.end(), model.net.parameters().begin());
  return losses;
}

}  // namespace pcdiff
