#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "pcdiff/rng.hpp"

namespace pcdiff::oracle {

using Vector = std::vector<double>;

/// Row-major n x n matrix; row i holds the transition probabilities out of state i.
struct Kernel {
  std::size_t n = 0;
  std::vector<double> p;

  double operator()(std::size_t from, std::size_t to) const { return p[from * n + to]; }
};

/// Finite-state reverse chain with a positive score vector.
///
/// kernels[t - 1] maps states at time t to states at t - 1 (t = 1..T);
/// marginals[t] is the distribution at time t (t = 0..T).
struct DiscreteChain {
  std::size_t n = 0;
  int T = 0;
  std::vector<Kernel> kernels;
  std::vector<Vector> marginals;
  Vector score;

  const Kernel& kernel(int t) const { return kernels.at(static_cast<std::size_t>(t - 1)); }
  /// Throws std::invalid_argument when any invariant fails.
  void validate() const;
};

/// Kernel rows and p_T from a symmetric Dirichlet(1), scores exp(U(-2, 2)),
/// lower marginals by push-forward.
DiscreteChain random_chain(std::size_t n, int T, RngStream& rng);

/// Builds a chain from p_T and kernels, deriving lower marginals.
DiscreteChain make_chain(Vector p_T, std::vector<Kernel> kernels, Vector score);

/// p^T K: the base push-forward.
Vector push_forward(const Kernel& K, std::span<const double> p);

/// (p * s) / sum(p * s).
Vector tilt_distribution(std::span<const double> p, std::span<const double> s);

/// v_j = sum_i p(i) K(j | i) s_j / s_i, not renormalized.
Vector tilted_kernel_apply(const Kernel& K, std::span<const double> s, std::span<const double> p);

struct Theorem1Report {
  double max_error = 0.0;
  /// L-inf error at t = T-1, ..., 0.
  Vector per_step_errors;
  /// Total mass of tilted_kernel_apply before renormalization at each step.
  Vector mass_ratios;
};

/// Propagates tilt(p_T, s) through the tilted kernels and compares each
/// renormalized marginal against tilt(p_t, s).
Theorem1Report verify_theorem1(const DiscreteChain& chain);

struct DpoEquivalenceReport {
  /// max |DPO inner argument - score-ratio inner argument|.
  double max_abs_diff = 0.0;
  /// max |-log sigma(a) + log sigma(b)|.
  double max_loss_diff = 0.0;
  std::size_t tuples = 0;
  std::size_t redraws = 0;
};

/// Compares the per-step DPO argument (tilted kernel as policy, base kernel as
/// reference) with the score-ratio argument on random state tuples.
DpoEquivalenceReport verify_dpo_equivalence(const DiscreteChain& chain, std::size_t n_tuples, double beta,
                                            RngStream& rng);

/// Trapezoid rule on a uniform grid.
struct QuadratureGrid {
  QuadratureGrid(double lo, double hi, std::size_t n_points);

  double lo;
  double hi;
  std::size_t n_points;

  double step() const noexcept { return (hi - lo) / static_cast<double>(n_points - 1); }
  double point(std::size_t i) const noexcept { return lo + step() * static_cast<double>(i); }
  double weight(std::size_t i) const noexcept {
    return (i == 0 || i + 1 == n_points) ? 0.5 * step() : step();
  }
};

struct GridDensity {
  QuadratureGrid grid;
  Vector values;

  double integral() const;
  double mean() const;
  double variance() const;
};

using ScalarFn = std::function<double(double)>;

/// A 1D log-score with its derivative.
struct LogScore1D {
  ScalarFn value;
  ScalarFn derivative;
};

LogScore1D log_sigmoid_score();
LogScore1D linear_log_score(double slope, double offset = 0.0);

/// Normal density N(mu, sigma2) on the grid, trapezoid-normalized.
GridDensity gaussian_on_grid(double mu, double sigma2, const QuadratureGrid& grid);

/// Density proportional to N(x; mu, sigma2) exp(logscore(x)). Throws
/// std::invalid_argument if sigma2 <= 0 or the base Gaussian puts more than
/// 1e-8 of its mass outside the grid.
GridDensity tilted_gaussian_1d(double mu, double sigma2, const ScalarFn& logscore, const QuadratureGrid& grid);

/// 0.5 * integral |p - q| on the shared grid.
double total_variation(const GridDensity& p, const GridDensity& q);

struct Theorem3Report {
  Vector sigma2;
  Vector tv_distances;
};

/// TV between the exact tilted transition and N(mu + gamma sigma2 d/dx logscore(mu), sigma2)
/// for each variance in the list.
Theorem3Report verify_theorem3(double mu, std::span<const double> sigma2_list, const LogScore1D& logscore,
                               const QuadratureGrid& grid, double gamma = 1.0);

}  // namespace pcdiff::oracle
