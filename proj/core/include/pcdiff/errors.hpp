#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pcdiff {

/// Raised when a gradient or parameter contains a non-finite value.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t index)
      : std::runtime_error(what + " (parameter index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Corrupt or truncated on-disk artifact (bad magic, short payload, malformed header).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A randomized construction could not finish within its attempt budget.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcdiff
