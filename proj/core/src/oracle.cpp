#include "pcdiff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pcdiff::oracle {

namespace {

constexpr double kSumTolerance = 1e-14;

double linf(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

Vector dirichlet_ones(std::size_t n, RngStream& rng) {
  Vector v(n);
  for (double& x : v) x = -std::log1p(-rng.uniform());
  const double total = sum(v);
  for (double& x : v) x /= total;
  return v;
}

double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

}  // namespace

void DiscreteChain::validate() const {
  if (n == 0 || T < 1) throw std::invalid_argument("chain: need n >= 1 and T >= 1");
  if (kernels.size() != static_cast<std::size_t>(T) || marginals.size() != static_cast<std::size_t>(T) + 1) {
    throw std::invalid_argument("chain: need T kernels and T + 1 marginals");
  }
  if (score.size() != n) throw std::invalid_argument("chain: score length != n");
  for (double s : score) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("chain: scores must be strictly positive");
  }
  for (const Kernel& K : kernels) {
    if (K.n != n || K.p.size() != n * n) throw std::invalid_argument("chain: kernel shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!(K(i, j) >= 0.0)) throw std::invalid_argument("chain: negative transition probability");
        row += K(i, j);
      }
      if (std::abs(row - 1.0) > kSumTolerance) throw std::invalid_argument("chain: kernel row does not sum to 1");
    }
  }
  for (const Vector& p : marginals) {
    if (p.size() != n) throw std::invalid_argument("chain: marginal length != n");
    if (std::abs(sum(p) - 1.0) > kSumTolerance) throw std::invalid_argument("chain: marginal does not sum to 1");
  }
  for (int t = T; t >= 1; --t) {
    const Vector pushed = push_forward(kernel(t), marginals[static_cast<std::size_t>(t)]);
    if (linf(pushed, marginals[static_cast<std::size_t>(t) - 1]) > kSumTolerance) {
      throw std::invalid_argument("chain: marginals inconsistent with kernels at t = " + std::to_string(t));
    }
  }
}

DiscreteChain make_chain(Vector p_T, std::vector<Kernel> kernels, Vector score) {
  DiscreteChain c;
  c.n = p_T.size();
  c.T = static_cast<int>(kernels.size());
  c.kernels = std::move(kernels);
  c.score = std::move(score);
  c.marginals.assign(static_cast<std::size_t>(c.T) + 1, Vector{});
  c.marginals[static_cast<std::size_t>(c.T)] = std::move(p_T);
  for (int t = c.T; t >= 1; --t) {
    if (c.kernel(t).n != c.n) throw std::invalid_argument("make_chain: kernel size differs from p_T");
    c.marginals[static_cast<std::size_t>(t) - 1] = push_forward(c.kernel(t), c.marginals[static_cast<std::size_t>(t)]);
  }
  c.validate();
  return c;
}

DiscreteChain random_chain(std::size_t n, int T, RngStream& rng) {
  if (n == 0 || T < 1) throw std::invalid_argument("random_chain: need n >= 1 and T >= 1");
  std::vector<Kernel> kernels(static_cast<std::size_t>(T));
  for (Kernel& K : kernels) {
    K.n = n;
    K.p.reserve(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      const Vector row = dirichlet_ones(n, rng);
      K.p.insert(K.p.end(), row.begin(), row.end());
    }
  }
  Vector p_T = dirichlet_ones(n, rng);
  Vector score(n);
  for (double& s : score) s = std::exp(rng.uniform(-2.0, 2.0));
  return make_chain(std::move(p_T), std::move(kernels), std::move(score));
}

Vector push_forward(const Kernel& K, std::span<const double> p) {
  if (p.size() != K.n) throw std::invalid_argument("push_forward: dimension mismatch");
  Vector out(K.n, 0.0);
  for (std::size_t i = 0; i < K.n; ++i) {
    for (std::size_t j = 0; j < K.n; ++j) out[j] += p[i] * K(i, j);
  }
  return out;
}

Vector tilt_distribution(std::span<const double> p, std::span<const double> s) {
  if (p.size() != s.size()) throw std::invalid_argument("tilt_distribution: dimension mismatch");
  Vector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(s[i] > 0.0)) throw std::invalid_argument("tilt_distribution: scores must be > 0");
    out[i] = p[i] * s[i];
  }
  const double z = sum(out);
  for (double& v : out) v /= z;
  return out;
}

Vector tilted_kernel_apply(const Kernel& K, std::span<const double> s, std::span<const double> p) {
  if (p.size() != K.n || s.size() != K.n) throw std::invalid_argument("tilted_kernel_apply: dimension mismatch");
  Vector out(K.n, 0.0);
  for (std::size_t i = 0; i < K.n; ++i) {
    for (std::size_t j = 0; j < K.n; ++j) out[j] += p[i] * K(i, j) * s[j] / s[i];
  }
  return out;
}

Theorem1Report verify_theorem1(const DiscreteChain& chain) {
  chain.validate();
  Theorem1Report report;
  Vector current = tilt_distribution(chain.marginals[static_cast<std::size_t>(chain.T)], chain.score);
  for (int t = chain.T; t >= 1; --t) {
    Vector v = tilted_kernel_apply(chain.kernel(t), chain.score, current);
    const double mass = sum(v);
    for (double& x : v) x /= mass;
    const Vector direct = tilt_distribution(chain.marginals[static_cast<std::size_t>(t) - 1], chain.score);
    const double err = linf(v, direct);
    report.per_step_errors.push_back(err);
    report.mass_ratios.push_back(mass);
    report.max_error = std::max(report.max_error, err);
    current = std::move(v);
  }
  return report;
}

DpoEquivalenceReport verify_dpo_equivalence(const DiscreteChain& chain, std::size_t n_tuples, double beta,
                                            RngStream& rng) {
  chain.validate();
  if (n_tuples == 0) throw std::invalid_argument("verify_dpo_equivalence: n_tuples must be >= 1");
  const auto last = static_cast<std::int64_t>(chain.n) - 1;
  const double bt = beta * static_cast<double>(chain.T);
  DpoEquivalenceReport report;

  struct Transition {
    std::size_t from;
    std::size_t to;
  };
  auto draw = [&](const Kernel& K) {
    while (true) {
      Transition tr{static_cast<std::size_t>(rng.uniform_int(0, last)),
                    static_cast<std::size_t>(rng.uniform_int(0, last))};
      if (K(tr.from, tr.to) > 0.0) return tr;
      ++report.redraws;
    }
  };
  // log(p_hat(j|i) / p(j|i)) with p_hat the tilted kernel entry.
  auto policy_log_ratio = [&](const Kernel& K, Transition tr) {
    const double base = K(tr.from, tr.to);
    const double tilted = base * chain.score[tr.to] / chain.score[tr.from];
    return std::log(tilted) - std::log(base);
  };
  auto score_log_ratio = [&](Transition tr) {
    return std::log(chain.score[tr.to]) - std::log(chain.score[tr.from]);
  };

  for (std::size_t k = 0; k < n_tuples; ++k) {
    const int t = static_cast<int>(rng.uniform_int(1, chain.T));
    const Kernel& K = chain.kernel(t);
    const Transition w = draw(K);
    const Transition l = draw(K);
    const double a = bt * policy_log_ratio(K, w) - bt * policy_log_ratio(K, l);
    const double b = bt * score_log_ratio(w) - bt * score_log_ratio(l);
    report.max_abs_diff = std::max(report.max_abs_diff, std::abs(a - b));
    report.max_loss_diff = std::max(report.max_loss_diff, std::abs(-log_sigmoid(a) + log_sigmoid(b)));
    ++report.tuples;
  }
  return report;
}

QuadratureGrid::QuadratureGrid(double lo_, double hi_, std::size_t n) : lo(lo_), hi(hi_), n_points(n) {
  if (!(hi > lo)) throw std::invalid_argument("quadrature grid: need hi > lo");
  if (n_points < 101) throw std::invalid_argument("quadrature grid: need at least 101 points");
}

double GridDensity::integral() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += grid.weight(i) * values[i];
  return acc;
}

double GridDensity::mean() const {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += grid.weight(i) * values[i] * grid.point(i);
  return acc / integral();
}

double GridDensity::variance() const {
  const double m = mean();
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = grid.point(i) - m;
    acc += grid.weight(i) * values[i] * r * r;
  }
  return acc / integral();
}

LogScore1D log_sigmoid_score() {
  return {[](double x) { return log_sigmoid(x); },
          [](double x) { return x >= 0.0 ? std::exp(-x) / (1.0 + std::exp(-x)) : 1.0 / (1.0 + std::exp(x)); }};
}

LogScore1D linear_log_score(double slope, double offset) {
  return {[=](double x) { return slope * x + offset; }, [=](double) { return slope; }};
}

namespace {

void check_coverage(double mu, double sigma2, const QuadratureGrid& grid) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("tilted_gaussian_1d: sigma2 must be > 0");
  const double sd = std::sqrt(sigma2);
  const double tail = 0.5 * std::erfc((mu - grid.lo) / (sd * std::numbers::sqrt2)) +
                      0.5 * std::erfc((grid.hi - mu) / (sd * std::numbers::sqrt2));
  if (tail > 1e-8) throw std::invalid_argument("tilted_gaussian_1d: grid too narrow for the base Gaussian");
}

GridDensity normalized_from_log(const QuadratureGrid& grid, const Vector& logv) {
  const double top = *std::max_element(logv.begin(), logv.end());
  GridDensity d{grid, Vector(grid.n_points)};
  for (std::size_t i = 0; i < grid.n_points; ++i) d.values[i] = std::exp(logv[i] - top);
  const double z = d.integral();
  for (double& v : d.values) v /= z;
  return d;
}

}  // namespace

GridDensity gaussian_on_grid(double mu, double sigma2, const QuadratureGrid& grid) {
  check_coverage(mu, sigma2, grid);
  Vector logv(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double r = grid.point(i) - mu;
    logv[i] = -r * r / (2.0 * sigma2);
  }
  return normalized_from_log(grid, logv);
}

GridDensity tilted_gaussian_1d(double mu, double sigma2, const ScalarFn& logscore, const QuadratureGrid& grid) {
  check_coverage(mu, sigma2, grid);
  Vector logv(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double x = grid.point(i);
    const double r = x - mu;
    logv[i] = -r * r / (2.0 * sigma2) + logscore(x);
  }
  return normalized_from_log(grid, logv);
}

double total_variation(const GridDensity& p, const GridDensity& q) {
  if (p.values.size() != q.values.size() || p.grid.lo != q.grid.lo || p.grid.hi != q.grid.hi) {
    throw std::invalid_argument("total_variation: densities live on different grids");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < p.values.size(); ++i) acc += p.grid.weight(i) * std::abs(p.values[i] - q.values[i]);
  return 0.5 * acc;
}

Theorem3Report verify_theorem3(double mu, std::span<const double> sigma2_list, const LogScore1D& logscore,
                               const QuadratureGrid& grid, double gamma) {
  if (sigma2_list.empty()) throw std::invalid_argument("verify_theorem3: empty variance list");
  for (std::size_t k = 1; k < sigma2_list.size(); ++k) {
    if (!(sigma2_list[k] < sigma2_list[k - 1])) throw std::invalid_argument("verify_theorem3: variances must descend");
  }
  Theorem3Report report;
  const double slope = logscore.derivative(mu);
  for (double s2 : sigma2_list) {
    const GridDensity exact = tilted_gaussian_1d(mu, s2, logscore.value, grid);
    const GridDensity approx = gaussian_on_grid(mu + gamma * s2 * slope, s2, grid);
    report.sigma2.push_back(s2);
    report.tv_distances.push_back(total_variation(exact, approx));
  }
  return report;
}

}  // namespace pcdiff::oracle
