#include "pcdiff/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pcdiff/errors.hpp"

namespace pcdiff {

void MixtureSpec::validate() const {
  if (means.empty()) throw std::invalid_argument("mixture: no components");
  if (weights.size() != means.size()) throw std::invalid_argument("mixture: one weight per component required");
  const std::size_t d = dim();
  if (d == 0) throw std::invalid_argument("mixture: zero-dimensional means");
  for (const auto& m : means) {
    if (m.size() != d) throw std::invalid_argument("mixture: ragged means");
  }
  if (!(stddev >= 0.0) || !std::isfinite(stddev)) throw std::invalid_argument("mixture: stddev must be >= 0");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture: weights must sum to 1");
}

MixtureSpec two_mode_spec(std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("two_mode_spec: dim must be >= 1");
  MixtureSpec spec;
  std::vector<double> left(dim, 0.0);
  std::vector<double> right(dim, 0.0);
  left[0] = -2.0;
  right[0] = 2.0;
  spec.means = {left, right};
  spec.stddev = 0.3;
  spec.weights = {0.5, 0.5};
  return spec;
}

ToyDataset make_mixture(const MixtureSpec& spec, std::size_t n, RngStream& rng) {
  spec.validate();
  if (n == 0) throw std::invalid_argument("make_mixture: n must be >= 1");
  const std::size_t d = spec.dim();
  ToyDataset ds{Tensor({n, d}), spec};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cum = spec.weights[0];
    while (u >= cum && k + 1 < spec.weights.size()) cum += spec.weights[++k];
    auto row = ds.points.row(i);
    for (std::size_t j = 0; j < d; ++j) row[j] = spec.means[k][j] + spec.stddev * rng.gaussian();
  }
  return ds;
}

Tensor make_two_moons(std::size_t n, double noise, RngStream& rng) {
  if (n == 0) throw std::invalid_argument("make_two_moons: n must be >= 1");
  Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = std::numbers::pi * rng.uniform();
    const bool lower = rng.uniform() < 0.5;
    double x = std::cos(angle);
    double y = std::sin(angle);
    if (lower) {
      x = 1.0 - x;
      y = 0.5 - y;
    }
    out.at(i, 0) = x + noise * rng.gaussian();
    out.at(i, 1) = y + noise * rng.gaussian();
  }
  return out;
}

GroundTruthReward GroundTruthReward::mode_indicator(MixtureSpec spec, std::size_t preferred) {
  spec.validate();
  if (preferred >= spec.means.size()) throw std::invalid_argument("mode reward: preferred component out of range");
  if (!(spec.stddev > 0.0)) throw std::invalid_argument("mode reward: stddev must be > 0");
  return GroundTruthReward(ModeIndicatorReward{std::move(spec), preferred});
}

GroundTruthReward GroundTruthReward::linear(std::vector<double> w) {
  if (w.empty()) throw std::invalid_argument("linear reward: empty weight vector");
  return GroundTruthReward(LinearReward{std::move(w)});
}

std::size_t GroundTruthReward::dim() const {
  if (const auto* lin = std::get_if<LinearReward>(&kind_)) return lin->w.size();
  return std::get<ModeIndicatorReward>(kind_).spec.dim();
}

double GroundTruthReward::operator()(std::span<const double> x) const {
  if (x.size() != dim()) throw std::invalid_argument("reward: dimension mismatch");
  if (const auto* lin = std::get_if<LinearReward>(&kind_)) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += lin->w[i] * x[i];
    return acc;
  }
  const auto& mode = std::get<ModeIndicatorReward>(kind_);
  const auto& spec = mode.spec;
  const double inv_2var = 1.0 / (2.0 * spec.stddev * spec.stddev);
  std::vector<double> logits(spec.means.size());
  for (std::size_t k = 0; k < spec.means.size(); ++k) {
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[j] - spec.means[k][j];
      sq += r * r;
    }
    logits[k] = spec.weights[k] > 0.0 ? std::log(spec.weights[k]) - sq * inv_2var
                                      : -std::numeric_limits<double>::infinity();
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - top);
  return std::exp(logits[mode.preferred] - top) / denom;
}

PreferencePairSet make_preference_pairs(const Tensor& points, const GroundTruthReward& reward, std::size_t n_pairs,
                                        RngStream& rng) {
  if (points.rank() != 2 || points.rows() < 2) throw std::invalid_argument("preference pairs: need >= 2 points");
  PreferencePairSet set;
  if (n_pairs == 0) return set;
  set.pairs.reserve(n_pairs);
  const auto last = static_cast<std::int64_t>(points.rows()) - 1;
  const std::size_t budget = 100 * n_pairs;
  for (std::size_t attempt = 0; attempt < budget && set.size() < n_pairs; ++attempt) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, last));
    auto j = static_cast<std::size_t>(rng.uniform_int(0, last - 1));
    if (j >= i) ++j;
    const double ri = reward(points.row(i));
    const double rj = reward(points.row(j));
    if (ri == rj) continue;
    if (ri > rj) {
      set.pairs.push_back({points.row_tensor(i), points.row_tensor(j)});
    } else {
      set.pairs.push_back({points.row_tensor(j), points.row_tensor(i)});
    }
  }
  if (set.size() < n_pairs) {
    throw ConstructionError("preference pairs: only " + std::to_string(set.size()) + " strict pairs after " +
                            std::to_string(budget) + " attempts");
  }
  return set;
}

bool pairs_strictly_ordered(const PreferencePairSet& set, const GroundTruthReward& reward) {
  return std::all_of(set.pairs.begin(), set.pairs.end(), [&](const PreferencePair& p) {
    return reward(p.winner.values()) > reward(p.loser.values());
  });
}

double win_rate(const Tensor& samples_a, const Tensor& samples_b, const GroundTruthReward& reward) {
  if (samples_a.shape() != samples_b.shape() || samples_a.rank() != 2) {
    throw std::invalid_argument("win_rate: sample sets must have equal shape [n, d]");
  }
  const std::size_t n = samples_a.rows();
  double wins = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ra = reward(samples_a.row(i));
    const double rb = reward(samples_b.row(i));
    if (ra > rb) {
      wins += 1.0;
    } else if (ra == rb) {
      wins += 0.5;
    }
  }
  return wins / static_cast<double>(n);
}

double mode_mass(const Tensor& samples, const MixtureSpec& spec, std::size_t component) {
  spec.validate();
  if (samples.rank() != 2 || samples.cols() != spec.dim()) throw std::invalid_argument("mode_mass: dimension mismatch");
  if (component >= spec.means.size()) throw std::invalid_argument("mode_mass: component out of range");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    auto x = samples.row(i);
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < spec.means.size(); ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) sq += (x[j] - spec.means[k][j]) * (x[j] - spec.means[k][j]);
      if (sq < best_sq) {
        best_sq = sq;
        best = k;
      }
    }
    if (best == component) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.rows());
}

}  // namespace pcdiff
