#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// Seeded random stream. Same seed and same call sequence give bit-identical
/// draws; the full state round-trips through serialize()/deserialize().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  /// Independent stream keyed by (seed, index). Used to give every sample of
  /// a batch its own stream so serial and threaded runs agree.
  static RngStream derived(std::uint64_t seed, std::uint64_t index);

  std::uint64_t seed() const noexcept { return seed_; }

  double gaussian();
  /// I.i.d. standard normal tensor. Throws std::invalid_argument on an empty
  /// or zero-sized shape.
  Tensor gaussian(const Shape& shape);
  double uniform(double lo = 0.0, double hi = 1.0);
  /// Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  std::uint64_t next_u64() { return engine_(); }

  std::string serialize() const;
  static RngStream deserialize(const std::string& state);

  friend bool operator==(const RngStream& a, const RngStream& b) {
    return a.seed_ == b.seed_ && a.engine_ == b.engine_ && a.normal_ == b.normal_;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace pcdiff
