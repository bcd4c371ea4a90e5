#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pcdiff/classifier.hpp"
#include "pcdiff/diffusion.hpp"

namespace pcdiff {

/// Binary layout:
///   "PCDF" | u32 LE format_version | u32 LE header_length | UTF-8 JSON header |
///   parameters as f64 LE, in Mlp::parameters() order.
inline constexpr char kCheckpointMagic[4] = {'P', 'C', 'D', 'F'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind { diffusion, classifier };

struct CheckpointHeader {
  ModelKind kind = ModelKind::diffusion;
  std::vector<std::size_t> layer_sizes;
  int T = 0;
  double beta_start = 0.0;
  double beta_end = 0.0;
  bool time_conditioned = false;
  std::size_t data_dim = 0;
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
};

struct Checkpoint {
  CheckpointHeader header;
  std::vector<double> params;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
/// Throws FormatError on bad magic, unknown version, malformed header or a
/// payload whose length disagrees with the header.
Checkpoint read_checkpoint(std::istream& is);

Checkpoint to_checkpoint(const DiffusionModel& model, std::uint64_t seed);
Checkpoint to_checkpoint(const PreferenceClassifier& clf, const NoiseSchedule& schedule, std::uint64_t seed);
DiffusionModel diffusion_from_checkpoint(const Checkpoint& ckpt);
PreferenceClassifier classifier_from_checkpoint(const Checkpoint& ckpt);

/// File helpers; I/O failures surface as std::runtime_error (not FormatError).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pcdiff
