#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pcdiff/checkpoint.hpp"
#include "pcdiff/classifier.hpp"
#include "pcdiff/schedule.hpp"
#include "pcdiff_cli/commands.hpp"

namespace pcdiff {
namespace {

namespace fs = std::filesystem;
using cli::ExitCode;

// Small sizes keep the end-to-end commands fast.
const std::vector<std::string> kSmall = {
    "--set", "train.steps=150",    "--set", "classifier.steps=100", "--set", "data.n=400",
    "--set", "data.pairs=200",     "--set", "sample.n=40",          "--set", "model.hidden=16,16",
    "--set", "classifier.hidden=8"};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli_run(std::vector<std::string> args, std::initializer_list<std::vector<std::string>> extra = {}) {
  for (const auto& e : extra) args.insert(args.end(), e.begin(), e.end());
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path root;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("pcdiff_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    const auto r = cli_run({"train-diffusion", "--out", (root / "diff").string()}, {kSmall});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto c = cli_run({"train-classifier", "--diffusion", diffusion().string(), "--out",
                            (root / "clf").string()},
                           {kSmall});
    ASSERT_EQ(c.code, 0) << c.err;
  }

  static void TearDownTestSuite() { fs::remove_all(root); }

  static fs::path diffusion() { return root / "diff" / "diffusion.pcdf"; }
  static fs::path classifier() { return root / "clf" / "classifier.pcdf"; }
};

fs::path CliTest::root;

TEST_F(CliTest, TrainingWritesArtifacts) {
  EXPECT_TRUE(fs::exists(diffusion()));
  EXPECT_TRUE(fs::exists(classifier()));
  const auto losses = slurp(root / "diff" / "losses.csv");
  EXPECT_EQ(losses.rfind("step,loss\n", 0), 0u);
  EXPECT_EQ(std::count(losses.begin(), losses.end(), '\n'), 151);
}

TEST_F(CliTest, SampleIsDeterministic) {
  const auto a = root / "s_a";
  const auto b = root / "s_b";
  const std::vector<std::string> base = {"sample", "--diffusion", diffusion().string(), "--classifier",
                                         classifier().string(), "--set", "guidance.gamma=5"};
  ASSERT_EQ(cli_run(base, {kSmall, {"--out", a.string()}}).code, 0);
  ASSERT_EQ(cli_run(base, {kSmall, {"--out", b.string(), "--threads", "3"}}).code, 0);
  EXPECT_EQ(slurp(a / "samples.csv"), slurp(b / "samples.csv"));
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  EXPECT_EQ(slurp(a / "trace.csv").rfind("sample_id,t,score_before,score_after,resamples,accepted_by\n", 0), 0u);
}

TEST_F(CliTest, ZeroGammaWithoutRejectionMatchesUnguided) {
  const auto guided = root / "g0";
  const auto plain = root / "plain";
  ASSERT_EQ(cli_run({"sample", "--diffusion", diffusion().string(), "--classifier", classifier().string(), "--out",
                     guided.string(), "--set", "guidance.gamma=0", "--set", "guidance.rejection=false"},
                    {kSmall})
                .code,
            0);
  ASSERT_EQ(cli_run({"sample", "--diffusion", diffusion().string(), "--out", plain.string()}, {kSmall}).code, 0);
  EXPECT_EQ(slurp(guided / "samples.csv"), slurp(plain / "samples.csv"));
  EXPECT_EQ(slurp(plain / "trace.csv"), "sample_id,t,score_before,score_after,resamples,accepted_by\n");
}

TEST_F(CliTest, ConstantClassifierEvalIsATie) {
  PreferenceClassifier clf(Mlp({2 + kTimeFeatureWidth, 1}), 2, true, 50);
  const auto path = root / "const.pcdf";
  save_checkpoint(path, to_checkpoint(clf, make_schedule(50, 1e-4, 0.02), 0));
  const auto out = root / "eval_const";
  const auto r = cli_run({"eval", "--diffusion", diffusion().string(), "--classifier", path.string(), "--out",
                          out.string(), "--n", "60"},
                         {kSmall});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(out / "metrics.json"));
  const double w = j.at("win_rate").get<double>();
  EXPECT_GT(w, 0.45);
  EXPECT_LT(w, 0.55);
  EXPECT_EQ(j.at("mean_resamples").get<double>(), 0.0);
  EXPECT_EQ(j.at("preferred_mode_mass_guided").get<double>(), j.at("preferred_mode_mass_unguided").get<double>());
}

TEST_F(CliTest, InvalidInputsExitTwo) {
  const auto out = (root / "bad").string();
  EXPECT_EQ(cli_run({"eval", "--diffusion", diffusion().string(), "--classifier", classifier().string(), "--out", out,
                     "--n", "0"})
                .code,
            ExitCode::kInvalidInput);

  const auto cfg_err = cli_run({"train-diffusion", "--out", out, "--set", "schedule.beta_start=1.5"});
  EXPECT_EQ(cfg_err.code, ExitCode::kInvalidInput);
  EXPECT_NE(cfg_err.err.find("schedule.beta_start"), std::string::npos);

  EXPECT_EQ(cli_run({"sample", "--diffusion", diffusion().string(), "--out", out, "--set", "schedule.T=40"}).code,
            ExitCode::kInvalidInput);
  EXPECT_EQ(cli_run({"sample", "--diffusion", diffusion().string(), "--out", out, "--set", "data.task=two_mode_1d"})
                .code,
            ExitCode::kInvalidInput);
  EXPECT_EQ(cli_run({"sample", "--diffusion", classifier().string(), "--out", out}).code, ExitCode::kInvalidInput);
  EXPECT_EQ(cli_run({"bogus"}).code, ExitCode::kInvalidInput);
  EXPECT_EQ(cli_run({"verify", "--suite", "theorem9"}).code, ExitCode::kInvalidInput);
}

TEST_F(CliTest, CorruptCheckpointExitsThree) {
  const auto bad = root / "bad.pcdf";
  std::string bytes = slurp(diffusion());
  bytes[0] = 'Z';
  std::ofstream(bad, std::ios::binary) << bytes;
  EXPECT_EQ(cli_run({"sample", "--diffusion", bad.string(), "--out", (root / "x").string()}).code,
            ExitCode::kIoError);
  EXPECT_EQ(cli_run({"train-diffusion", "--config", (root / "missing.conf").string(), "--out",
                     (root / "y").string()})
                .code,
            ExitCode::kIoError);
}

TEST_F(CliTest, VerifyAllReportsFourSuites) {
  const auto dir = root / "verify";
  const auto r = cli_run({"verify", "--suite", "all", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j.at("suites").size(), 4u);
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_EQ(j.at("seed").get<int>(), 7);
  EXPECT_TRUE(fs::exists(dir / "report.txt"));
}

}  // namespace
}  // namespace pcdiff
