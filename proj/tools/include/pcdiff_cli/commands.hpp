#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcdiff/config.hpp"

namespace pcdiff::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kVerificationFailed = 1,
  kInvalidInput = 2,
  kIoError = 3,
};

namespace fs = std::filesystem;

/// Trains the noise predictor; writes diffusion.pcdf and losses.csv to out_dir.
int run_train_diffusion(const Config& cfg, const fs::path& out_dir, std::ostream& log);

/// Trains the preference classifier against the diffusion checkpoint's
/// schedule; writes classifier.pcdf and losses.csv. Pairs come from
/// pairs_csv when given, otherwise from the configured task.
int run_train_classifier(const Config& cfg, const fs::path& diffusion_ckpt, const fs::path& out_dir,
                         const std::optional<fs::path>& pairs_csv, std::ostream& log);

/// Writes samples.csv and trace.csv. Without a classifier this is plain
/// ancestral sampling and trace.csv holds only its header.
int run_sample(const Config& cfg, const fs::path& diffusion_ckpt, const std::optional<fs::path>& classifier_ckpt,
               const fs::path& out_dir, unsigned threads, std::ostream& log);

/// Runs one suite or "all"; prints a key: value report to log and, when
/// out_dir is given, writes report.txt and report.json there.
int run_verify(const std::string& suite, std::uint64_t seed, const std::optional<fs::path>& out_dir,
               std::ostream& log);

/// Paired guided/unguided draws; writes metrics.json.
int run_eval(const Config& cfg, const fs::path& diffusion_ckpt, const fs::path& classifier_ckpt, std::int64_t n,
             const fs::path& out_dir, unsigned threads, std::ostream& log);

/// Parses argv-style arguments (without the program name) and dispatches.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pcdiff::cli
