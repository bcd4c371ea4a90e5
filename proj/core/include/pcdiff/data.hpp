#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "pcdiff/rng.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// Isotropic Gaussian mixture with a shared standard deviation.
struct MixtureSpec {
  std::vector<std::vector<double>> means;
  double stddev = 0.3;
  std::vector<double> weights;

  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  /// Throws std::invalid_argument on ragged means, negative stddev, or
  /// weights that are negative or do not sum to 1.
  void validate() const;
};

/// Equal-weight modes at -2 and +2 on the first axis, stddev 0.3.
MixtureSpec two_mode_spec(std::size_t dim = 2);

struct ToyDataset {
  Tensor points;  // [n, d]
  MixtureSpec spec;
};

ToyDataset make_mixture(const MixtureSpec& spec, std::size_t n, RngStream& rng);

/// Classic interleaved half circles, each point jittered by N(0, noise^2).
Tensor make_two_moons(std::size_t n, double noise, RngStream& rng);

struct ModeIndicatorReward {
  MixtureSpec spec;
  std::size_t preferred = 0;
};

struct LinearReward {
  std::vector<double> w;
};

/// Synthetic stand-in for a human judge.
class GroundTruthReward {
 public:
  /// Posterior responsibility of component `preferred` under `spec`.
  static GroundTruthReward mode_indicator(MixtureSpec spec, std::size_t preferred);
  /// <w, x>.
  static GroundTruthReward linear(std::vector<double> w);

  double operator()(std::span<const double> x) const;
  std::size_t dim() const;
  bool is_linear() const noexcept { return std::holds_alternative<LinearReward>(kind_); }

 private:
  explicit GroundTruthReward(std::variant<ModeIndicatorReward, LinearReward> kind) : kind_(std::move(kind)) {}
  std::variant<ModeIndicatorReward, LinearReward> kind_;
};

struct PreferencePair {
  Tensor winner;
  Tensor loser;
};

struct PreferencePairSet {
  std::vector<PreferencePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  std::size_t dim() const { return pairs.empty() ? 0 : pairs.front().winner.size(); }
};

/// Draws distinct point pairs uniformly, labels the higher-reward point the
/// winner and discards ties. Throws ConstructionError when 100 * n_pairs
/// attempts do not yield enough strict pairs.
PreferencePairSet make_preference_pairs(const Tensor& points, const GroundTruthReward& reward, std::size_t n_pairs,
                                        RngStream& rng);

/// True iff every pair is strictly ordered by `reward`.
bool pairs_strictly_ordered(const PreferencePairSet& set, const GroundTruthReward& reward);

/// Mean over rows of 1 / 0.5 / 0 for reward(a_i) >, ==, < reward(b_i).
double win_rate(const Tensor& samples_a, const Tensor& samples_b, const GroundTruthReward& reward);

/// Fraction of rows whose nearest mixture mean is component `component`.
double mode_mass(const Tensor& samples, const MixtureSpec& spec, std::size_t component);

/// CSV with header dim_0,...,dim_{d-1}.
void write_points_csv(std::ostream& os, const Tensor& points);
Tensor read_points_csv(std::istream& is);

/// CSV with header pair_id,role,dim_0,...; role is "winner" or "loser".
void write_pairs_csv(std::ostream& os, const PreferencePairSet& set);
PreferencePairSet read_pairs_csv(std::istream& is);

}  // namespace pcdiff
