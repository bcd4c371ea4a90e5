#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace pcdiff {

/// Variance schedule tables indexed by timestep t = 1..T, with the
/// cumulative product also defined at t = 0 (alpha_bar(0) == 1).
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  int T() const noexcept { return T_; }
  double beta_start() const noexcept { return beta_start_; }
  double beta_end() const noexcept { return beta_end_; }

  double beta(int t) const { return beta_[check(t, 1)]; }
  double alpha(int t) const { return alpha_[check(t, 1)]; }
  double alpha_bar(int t) const { return alpha_bar_[check(t, 0)]; }
  /// Posterior variance (1 - abar_{t-1}) / (1 - abar_t) * beta_t; zero at t = 1.
  double sigma2(int t) const { return sigma2_[check(t, 1)]; }

  friend NoiseSchedule make_schedule(int T, double beta_start, double beta_end);
  friend bool operator==(const NoiseSchedule&, const NoiseSchedule&) = default;

 private:
  std::size_t check(int t, int lo) const;

  int T_ = 0;
  double beta_start_ = 0.0;
  double beta_end_ = 0.0;
  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
  std::vector<double> sigma2_;
};

/// Linear beta schedule from beta_start (t = 1) to beta_end (t = T).
/// Requires T >= 2 and 0 < beta_start <= beta_end < 1.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);

inline constexpr std::size_t kTimeFeatureWidth = 8;

/// Sinusoidal features of t / T at four octave-spaced frequencies,
/// laid out as [sin f0 u, cos f0 u, sin f1 u, cos f1 u, ...].
std::array<double, kTimeFeatureWidth> time_features(int t, int T);

}  // namespace pcdiff
