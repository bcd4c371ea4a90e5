#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pcdiff {

struct AdamwOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Moment accumulators and step counter for one flat parameter vector.
struct AdamwState {
  AdamwState() = default;
  AdamwState(std::size_t parameter_count, AdamwOptions options);

  AdamwOptions options;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step = 0;
};

/// One decoupled-weight-decay Adam update, in place. `lr_scale` multiplies
/// options.lr for this step (warm-up).
///
/// Throws NumericError naming the first non-finite gradient entry; in that
/// case neither params nor state are modified.
void adamw_step(AdamwState& state, std::span<double> params, std::span<const double> grads,
                double lr_scale = 1.0);

/// Linear ramp from lr/warmup_steps up to lr over the first `warmup_steps`
/// steps, constant afterwards.
class WarmupSchedule {
 public:
  /// Warm-up covers ceil(fraction * total_steps) steps, at least one.
  WarmupSchedule(std::int64_t total_steps, double fraction = 0.05);

  /// Multiplier for the 0-based step index.
  double scale(std::int64_t step) const noexcept;
  std::int64_t warmup_steps() const noexcept { return warmup_; }

 private:
  std::int64_t warmup_;
};

}  // namespace pcdiff
