#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pcdiff::verify {

/// Outcome of one verification sweep.
struct SuiteResult {
  std::string name;
  /// Worst-case error observed by the sweep.
  double max_error = 0.0;
  /// Tolerance max_error is held to.
  double bound = 0.0;
  bool passed = false;
  /// Supporting numbers in report order (e.g. per-variance TV distances).
  std::vector<std::pair<std::string, double>> details;
};

/// theorem1, theorem2, theorem3, gradcheck.
const std::vector<std::string>& suite_names();

/// 100 random chains with 2..16 states and 1..8 steps; bound 1e-10.
SuiteResult theorem1_suite(std::uint64_t seed);
/// 10 random chains x 100 tuples, beta = 0.1; bound 1e-12.
SuiteResult theorem2_suite(std::uint64_t seed);
/// log sigmoid score at mu = 0, sigma^2 in {0.04, 0.01, 0.0025}. Passes when
/// TV strictly decreases, the last TV is <= 0.05 and doubling the grid moves
/// every TV by at most 1e-8. Deterministic; the seed is unused.
SuiteResult theorem3_suite(std::uint64_t seed);
/// mlp_backward and log_score_grad against central differences on 100
/// random instances each; bound 1e-5 relative.
SuiteResult gradcheck_suite(std::uint64_t seed);

/// Dispatches on name; throws std::invalid_argument for an unknown suite.
SuiteResult run_suite(std::string_view name, std::uint64_t seed);

}  // namespace pcdiff::verify
