#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pcdiff/adamw.hpp"
#include "pcdiff/mlp.hpp"
#include "pcdiff/rng.hpp"
#include "pcdiff/schedule.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// Noise-prediction network plus the schedule it was trained against.
/// The network sees [x, time_features(t, T)] and returns a d-vector.
struct DiffusionModel {
  DiffusionModel() = default;
  /// Throws std::invalid_argument if the net widths disagree with data_dim.
  DiffusionModel(Mlp net, NoiseSchedule schedule, std::size_t data_dim);

  Mlp net;
  NoiseSchedule schedule;
  std::size_t data_dim = 0;
};

/// Glorot-initialized model with hidden widths `hidden`.
DiffusionModel make_diffusion_model(std::size_t data_dim, const std::vector<std::size_t>& hidden,
                                    NoiseSchedule schedule, RngStream& rng);

/// [x | time features] for a batch, one timestep per row.
Tensor with_time_features(const Tensor& x, std::span<const int> ts, int T);
Tensor with_time_features(const Tensor& x, int t, int T);

/// eps_phi(x, t) for a single sample [d] or a batch [n, d].
Tensor predict_noise(const DiffusionModel& model, const Tensor& x, int t);

/// Closed-form forward marginal: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
Tensor q_sample(const Tensor& x0, int t, const Tensor& eps, const NoiseSchedule& sched);

/// One forward kernel step: sqrt(alpha_t) x_prev + sqrt(beta_t) eps.
Tensor q_step(const Tensor& x_prev, int t, const Tensor& eps, const NoiseSchedule& sched);

struct JointPair {
  Tensor x_prev;  // x_{t-1}
  Tensor x_t;
};

/// (x_{t-1}, x_t) jointly drawn from the forward process started at x0:
/// x_{t-1} from the closed-form marginal (x0 itself when t == 1), then x_t
/// through the single-step kernel. Always consumes 2 * size(x0) normals.
JointPair q_joint_pair(const Tensor& x0, int t, RngStream& rng, const NoiseSchedule& sched);

/// Reverse update given a noise prediction and the injected noise:
/// (x_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps_pred) / sqrt(alpha_t) + sigma_t * noise.
Tensor ddpm_update(const Tensor& x_t, int t, const Tensor& eps_pred, const Tensor& noise,
                   const NoiseSchedule& sched);

/// One ancestral sampling step. Draws size(x_t) normals from rng at every t,
/// including t == 1 where sigma_1 == 0.
Tensor ddpm_step(const Tensor& x_t, int t, const DiffusionModel& model, RngStream& rng);

/// Full reverse chain for one sample: x_T ~ N(0, I) from rng, then t = T..1.
Tensor ddpm_sample_one(const DiffusionModel& model, RngStream& rng);

/// n samples, sample i driven by RngStream::derived(seed, i). Output does not
/// depend on `threads`.
Tensor ddpm_sample(const DiffusionModel& model, std::uint64_t seed, std::size_t n, unsigned threads = 1);

/// Inputs and targets for one noise-prediction minibatch.
struct DenoisingBatch {
  Tensor x_t;
  std::vector<int> ts;
  Tensor eps;
};

/// Draws `batch` rows of data with replacement, t ~ U{1..T}, eps ~ N(0, I).
DenoisingBatch make_denoising_batch(const Tensor& data, const NoiseSchedule& sched, std::size_t batch,
                                    RngStream& rng);

/// Mean squared error over all entries.
double denoising_loss(const Tensor& predicted, const Tensor& eps);

struct TrainOptions {
  std::int64_t steps = 5000;
  std::size_t batch = 128;
  double warmup_fraction = 0.05;
  /// Exponential moving average of the weights; the averaged weights replace
  /// the raw iterate when training ends. 0 disables averaging.
  double ema_decay = 0.995;
};

/// Minimizes the noise-prediction MSE with AdamW. Returns the per-step loss
/// (evaluated before each update).
std::vector<double> train_ddpm(const Tensor& data, DiffusionModel& model, AdamwState& opt,
                               const TrainOptions& options, RngStream& rng);

}  // namespace pcdiff
