#include "pcdiff/adamw.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pcdiff/errors.hpp"

namespace pcdiff {

AdamwState::AdamwState(std::size_t parameter_count, AdamwOptions opts)
    : options(opts), first_moment(parameter_count, 0.0), second_moment(parameter_count, 0.0) {
  if (!(options.lr > 0.0)) throw std::invalid_argument("adamw: lr must be > 0");
  if (!(options.beta1 >= 0.0 && options.beta1 < 1.0) || !(options.beta2 >= 0.0 && options.beta2 < 1.0)) {
    throw std::invalid_argument("adamw: betas must lie in [0, 1)");
  }
  if (!(options.eps > 0.0) || !(options.weight_decay >= 0.0)) {
    throw std::invalid_argument("adamw: eps must be > 0 and weight_decay >= 0");
  }
}

void adamw_step(AdamwState& state, std::span<double> params, std::span<const double> grads, double lr_scale) {
  const std::size_t n = params.size();
  if (grads.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
    throw std::invalid_argument("adamw_step: parameter, gradient and accumulator sizes differ");
  }
  const double lr = state.options.lr * lr_scale;
  if (!(lr > 0.0)) throw std::invalid_argument("adamw_step: effective lr must be > 0");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) throw NumericError("adamw_step: non-finite gradient", i);
  }

  const auto& o = state.options;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(o.beta1, t);
  const double bias2 = 1.0 - std::pow(o.beta2, t);
  const double decay = 1.0 - lr * o.weight_decay;

  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] = params[i] * decay - lr * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

WarmupSchedule::WarmupSchedule(std::int64_t total_steps, double fraction) {
  if (total_steps < 1) throw std::invalid_argument("warm-up: total_steps must be >= 1");
  const auto w = static_cast<std::int64_t>(std::ceil(fraction * static_cast<double>(total_steps)));
  warmup_ = std::max<std::int64_t>(1, w);
}

double WarmupSchedule::scale(std::int64_t step) const noexcept {
  if (step + 1 >= warmup_) return 1.0;
  return static_cast<double>(step + 1) / static_cast<double>(warmup_);
}

}  // namespace pcdiff
