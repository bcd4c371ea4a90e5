#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pcdiff/adamw.hpp"
#include "pcdiff/data.hpp"
#include "pcdiff/diffusion.hpp"
#include "pcdiff/mlp.hpp"
#include "pcdiff/rng.hpp"
#include "pcdiff/schedule.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff::testing {

/// Relative error with a floor on the denominator so that gradients that are
/// zero up to roundoff do not blow up the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central difference of f along coordinate i of `point`, step h = 1e-5 (1 + |p_i|).
inline double central_difference(const std::function<double()>& f, double& coordinate) {
  const double saved = coordinate;
  const double h = 1e-5 * (1.0 + std::abs(saved));
  coordinate = saved + h;
  const double up = f();
  coordinate = saved - h;
  const double down = f();
  coordinate = saved;
  return (up - down) / (2.0 * h);
}

/// Straight-line evaluation of an Mlp on one sample, written without
/// touching the library's forward kernel.
inline std::vector<double> reference_forward(const Mlp& net, std::span<const double> x) {
  std::vector<double> a(x.begin(), x.end());
  const auto& sizes = net.layer_sizes();
  const auto params = net.parameters();
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t n_in = sizes[l];
    const std::size_t n_out = sizes[l + 1];
    std::vector<double> z(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = params[offset + n_in * n_out + o];
      for (std::size_t i = 0; i < n_in; ++i) acc += params[offset + o * n_in + i] * a[i];
      z[o] = (l + 2 < sizes.size()) ? std::tanh(acc) : acc;
    }
    offset += n_in * n_out + n_out;
    a = std::move(z);
  }
  return a;
}

/// <u, f(x)> summed over a batch, used as the scalar whose gradient
/// mlp_backward returns.
inline double contracted_output(const Mlp& net, const Tensor& x, const Tensor& upstream) {
  double acc = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto y = reference_forward(net, x.row(r));
    for (std::size_t k = 0; k < y.size(); ++k) acc += upstream.at(r, k) * y[k];
  }
  return acc;
}

/// Two modes at -2 and +2 in 1D, 10,000 points, seed 7.
inline const ToyDataset& two_mode_1d_data() {
  static const ToyDataset ds = [] {
    RngStream rng(7);
    return make_mixture(two_mode_spec(1), 10000, rng);
  }();
  return ds;
}

inline DiffusionModel train_two_mode_1d(const NoiseSchedule& schedule) {
  RngStream rng(11);
  DiffusionModel m = make_diffusion_model(1, {64, 64, 64}, schedule, rng);
  AdamwState opt(m.net.parameter_count(), AdamwOptions{});
  train_ddpm(two_mode_1d_data().points, m, opt, TrainOptions{}, rng);
  return m;
}

/// Noise predictor trained on two_mode_1d_data() with the default schedule.
/// Built once per test binary.
inline const DiffusionModel& trained_two_mode_1d() {
  static const DiffusionModel model = train_two_mode_1d(make_schedule(50, 1e-4, 0.02));
  return model;
}

/// Same data with beta 1e-3..0.2, so alpha_bar_T ~ 0.005 and the N(0, I)
/// start matches q(x_T). Under the default schedule (alpha_bar_T ~ 0.6)
/// sampled modes land near +-1.85 instead of +-2.
inline const DiffusionModel& trained_two_mode_1d_full_noise() {
  static const DiffusionModel model = train_two_mode_1d(make_schedule(50, 1e-3, 0.2));
  return model;
}

/// Histogram of the first coordinate over [lo, hi), out-of-range values
/// clamped into the edge bins, normalized to sum 1.
inline std::vector<double> histogram(const Tensor& samples, double lo, double hi, std::size_t bins) {
  std::vector<double> h(bins, 0.0);
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    const double u = (samples.at(r, 0) - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(std::clamp(u, 0.0, static_cast<double>(bins) - 1.0));
    h[b] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(samples.rows());
  return h;
}

}  // namespace pcdiff::testing
