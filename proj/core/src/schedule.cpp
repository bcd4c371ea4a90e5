#include "pcdiff/schedule.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pcdiff {

std::size_t NoiseSchedule::check(int t, int lo) const {
  if (t < lo || t > T_) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                                std::to_string(T_) + "]");
  }
  return static_cast<std::size_t>(t);
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 2) throw std::invalid_argument("schedule: T must be >= 2");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw std::invalid_argument("schedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.T_ = T;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  const auto n = static_cast<std::size_t>(T) + 1;
  s.beta_.assign(n, 0.0);
  s.alpha_.assign(n, 1.0);
  s.alpha_bar_.assign(n, 1.0);
  s.sigma2_.assign(n, 0.0);
  for (int t = 1; t <= T; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(T - 1);
    const double beta = beta_start + (beta_end - beta_start) * frac;
    s.beta_[t] = beta;
    s.alpha_[t] = 1.0 - beta;
    s.alpha_bar_[t] = s.alpha_bar_[t - 1] * s.alpha_[t];
    s.sigma2_[t] = (1.0 - s.alpha_bar_[t - 1]) / (1.0 - s.alpha_bar_[t]) * beta;
  }
  return s;
}

std::array<double, kTimeFeatureWidth> time_features(int t, int T) {
  if (T < 1) throw std::invalid_argument("time_features: T must be >= 1");
  const double u = static_cast<double>(t) / static_cast<double>(T);
  std::array<double, kTimeFeatureWidth> out{};
  double freq = std::numbers::pi / 2.0;
  for (std::size_t k = 0; k < kTimeFeatureWidth / 2; ++k) {
    out[2 * k] = std::sin(freq * u);
    out[2 * k + 1] = std::cos(freq * u);
    freq *= 4.0;
  }
  return out;
}

}  // namespace pcdiff
