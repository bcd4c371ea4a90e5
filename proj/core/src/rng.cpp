#include "pcdiff/rng.hpp"

#include <sstream>
#include <stdexcept>

namespace pcdiff {

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(seed), normal_(0.0, 1.0) {}

RngStream RngStream::derived(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  RngStream out(seed);
  out.engine_.seed(seq);
  return out;
}

double RngStream::gaussian() { return normal_(engine_); }

Tensor RngStream::gaussian(const Shape& shape) {
  Tensor out(shape);
  for (double& v : out.values()) v = normal_(engine_);
  return out;
}

double RngStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

std::string RngStream::serialize() const {
  std::ostringstream os;
  os << seed_ << ' ' << engine_ << ' ' << normal_;
  return os.str();
}

RngStream RngStream::deserialize(const std::string& state) {
  std::istringstream is(state);
  RngStream out;
  is >> out.seed_ >> out.engine_ >> out.normal_;
  if (!is) throw std::invalid_argument("malformed rng state");
  return out;
}

}  // namespace pcdiff
