#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "pcdiff/classifier.hpp"
#include "pcdiff/diffusion.hpp"
#include "pcdiff/rng.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// What happens to a candidate whose score drops below the current x_t's.
enum class RejectionPolicy {
  /// Re-inject through the inversion at most M times, then accept.
  capped,
  /// Keep re-injecting until the score constraint holds (bounded only by
  /// GuidanceConfig::uncapped_limit as a runaway guard).
  uncapped,
};

struct GuidanceConfig {
  double gamma = 1.0;
  int M = 5;
  bool rejection_enabled = true;
  RejectionPolicy policy = RejectionPolicy::capped;
  int uncapped_limit = 10000;

  /// Throws std::invalid_argument on non-finite or negative gamma, M < 0.
  void validate() const;
};

enum class AcceptedBy { first_try, z_resample, cap_exhausted };

std::string_view to_string(AcceptedBy a) noexcept;

/// Audit record for one reverse step of one sample.
struct StepRecord {
  int t = 0;
  /// Score of the x_t the accepted candidate was compared against (the
  /// re-injected x_t after any resampling), scored at t.
  double score_before = 0.0;
  /// Score of the x_t the step started from, before any re-injection.
  double score_entry = 0.0;
  /// Score of the accepted x_{t-1}, scored at scoring_time(t - 1).
  double score_after = 0.0;
  int resamples = 0;
  int inversions = 0;
  AcceptedBy accepted_by = AcceptedBy::first_try;
};

/// Steps in reverse order of t (first record is t = T).
using SamplerTrace = std::vector<StepRecord>;

/// ddpm_step plus gamma * sigma_t^2 * grad log S(x_t). The gradient is taken
/// at x_t; rng is advanced exactly as ddpm_step advances it. With gamma == 0
/// the classifier is not evaluated at all.
Tensor guided_step(const Tensor& x_t, int t, const DiffusionModel& model, const PreferenceClassifier& clf,
                   const GuidanceConfig& cfg, RngStream& rng);

/// Deterministic DDIM inversion from x_{t-1} to x_t using eps_phi(x_{t-1}, t-1)
/// (t - 1 == 0 uses the t = 1 time features).
Tensor ddim_inverse_step(const Tensor& x_tm1, int t, const DiffusionModel& model);

/// Deterministic DDIM update from x_t to x_{t-1} with eps_phi(x_t, t); the
/// forward counterpart of ddim_inverse_step.
Tensor ddim_step(const Tensor& x_t, int t, const DiffusionModel& model);

struct ConstrainedResult {
  Tensor samples;  // [n, d]
  std::vector<SamplerTrace> traces;
};

/// One sample of the constrained preference-guided sampler, starting from
/// x_T ~ N(0, I) drawn from rng.
Tensor constrained_sample_one(const DiffusionModel& model, const PreferenceClassifier& clf,
                              const GuidanceConfig& cfg, RngStream& rng, SamplerTrace* trace);

/// n samples, sample i driven by RngStream::derived(seed, i); the result does
/// not depend on `threads`.
ConstrainedResult constrained_sample(const DiffusionModel& model, const PreferenceClassifier& clf,
                                     const GuidanceConfig& cfg, std::uint64_t seed, std::size_t n_samples,
                                     unsigned threads = 1);

}  // namespace pcdiff
