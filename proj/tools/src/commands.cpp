#include "pcdiff_cli/commands.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <functional>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "pcdiff/checkpoint.hpp"
#include "pcdiff/classifier.hpp"
#include "pcdiff/csv.hpp"
#include "pcdiff/data.hpp"
#include "pcdiff/diffusion.hpp"
#include "pcdiff/errors.hpp"
#include "pcdiff/guidance.hpp"
#include "pcdiff/verify.hpp"

namespace pcdiff::cli {

namespace {

using Json = nlohmann::ordered_json;

/// Filesystem failure that is not a format problem.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configured toy problem: training data plus the judge that labels pairs.
struct Task {
  Tensor data;
  GroundTruthReward reward;
  std::function<bool(std::span<const double>)> preferred;
};

std::size_t task_dim(const Config& cfg) { return cfg.get_string("data.task") == "two_mode_1d" ? 1 : 2; }

Task make_task(const Config& cfg, RngStream& rng) {
  const auto n = static_cast<std::size_t>(cfg.get_int("data.n"));
  const std::string name = cfg.get_string("data.task");
  if (name == "two_moons") {
    Tensor data = make_two_moons(n, 0.1, rng);
    // Upper moon is centred near y = 0.64, lower near y = -0.14.
    return {std::move(data), GroundTruthReward::linear({0.0, 1.0}),
            [](std::span<const double> x) { return x[1] > 0.25; }};
  }
  MixtureSpec spec = two_mode_spec(task_dim(cfg));
  ToyDataset ds = make_mixture(spec, n, rng);
  auto preferred = [spec](std::span<const double> x) {
    return mode_mass(Tensor({1, x.size()}, std::vector<double>(x.begin(), x.end())), spec, 1) == 1.0;
  };
  return {std::move(ds.points), GroundTruthReward::mode_indicator(spec, 1), preferred};
}

double preferred_fraction(const Tensor& samples, const Task& task) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < samples.rows(); ++r) hits += task.preferred(samples.row(r)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.rows());
}

NoiseSchedule schedule_from(const Config& cfg) {
  return make_schedule(static_cast<int>(cfg.get_int("schedule.T")), cfg.get_double("schedule.beta_start"),
                       cfg.get_double("schedule.beta_end"));
}

GuidanceConfig guidance_from(const Config& cfg) {
  GuidanceConfig g;
  g.gamma = cfg.get_double("guidance.gamma");
  g.M = static_cast<int>(cfg.get_int("guidance.M"));
  g.rejection_enabled = cfg.get_bool("guidance.rejection");
  g.policy = cfg.get_string("guidance.policy") == "uncapped" ? RejectionPolicy::uncapped : RejectionPolicy::capped;
  g.validate();
  return g;
}

std::uint64_t seed_of(const Config& cfg) { return static_cast<std::uint64_t>(cfg.get_int("seed")); }

void check_schedule(const Config& cfg, const NoiseSchedule& sched, const std::string& what) {
  if (!(schedule_from(cfg) == sched)) {
    std::ostringstream os;
    os << what << " schedule (T=" << sched.T() << ", beta_start=" << format_double(sched.beta_start())
       << ", beta_end=" << format_double(sched.beta_end()) << ") disagrees with the config";
    throw ConfigError("schedule", os.str());
  }
}

DiffusionModel load_diffusion(const Config& cfg, const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.header.kind != ModelKind::diffusion) throw std::invalid_argument(path.string() + " is not a diffusion checkpoint");
  DiffusionModel model = diffusion_from_checkpoint(ckpt);
  check_schedule(cfg, model.schedule, "diffusion checkpoint");
  if (model.data_dim != task_dim(cfg)) {
    throw ConfigError("data.task", "task dimension " + std::to_string(task_dim(cfg)) +
                                       " disagrees with diffusion checkpoint dimension " +
                                       std::to_string(model.data_dim));
  }
  return model;
}

PreferenceClassifier load_classifier(const DiffusionModel& model, const fs::path& path) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.header.kind != ModelKind::classifier) {
    throw std::invalid_argument(path.string() + " is not a classifier checkpoint");
  }
  PreferenceClassifier clf = classifier_from_checkpoint(ckpt);
  if (clf.data_dim != model.data_dim) {
    throw std::invalid_argument("classifier dimension " + std::to_string(clf.data_dim) +
                                " does not match diffusion dimension " + std::to_string(model.data_dim));
  }
  if (ckpt.header.T != model.schedule.T() || ckpt.header.beta_start != model.schedule.beta_start() ||
      ckpt.header.beta_end != model.schedule.beta_end()) {
    throw std::invalid_argument("classifier and diffusion checkpoints were built for different schedules");
  }
  return clf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_file(const fs::path& path, const std::string& contents) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << contents;
  if (!os) throw IoError("write failed for " + path.string());
}

void save(const fs::path& path, const Checkpoint& ckpt) {
  try {
    save_checkpoint(path, ckpt);
  } catch (const FormatError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw IoError(e.what());
  }
}

std::string losses_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i << ',' << format_double(losses[i]) << '\n';
  return os.str();
}

std::string samples_csv(const Tensor& samples) {
  std::ostringstream os;
  os << "sample_id";
  for (std::size_t j = 0; j < samples.cols(); ++j) os << ",dim_" << j;
  os << '\n';
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    os << r;
    for (double v : samples.row(r)) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

std::string trace_csv(const std::vector<SamplerTrace>& traces) {
  std::ostringstream os;
  os << "sample_id,t,score_before,score_after,resamples,accepted_by\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    for (const StepRecord& s : traces[i]) {
      os << i << ',' << s.t << ',' << format_double(s.score_before) << ',' << format_double(s.score_after) << ','
         << s.resamples << ',' << to_string(s.accepted_by) << '\n';
    }
  }
  return os.str();
}

/// Runs `body`, mapping exceptions onto the exit-code contract.
int guarded(std::ostream& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const FormatError& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoError& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const NumericError& e) {
    log << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const ConstructionError& e) {
    log << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kIoError;
  }
}

}  // namespace

int run_train_diffusion(const Config& cfg, const fs::path& out_dir, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    ensure_dir(out_dir);
    RngStream rng(seed_of(cfg));
    const Task task = make_task(cfg, rng);
    DiffusionModel model =
        make_diffusion_model(task.data.cols(), cfg.get_sizes("model.hidden"), schedule_from(cfg), rng);
    AdamwOptions adam;
    adam.lr = cfg.get_double("train.lr");
    AdamwState opt(model.net.parameter_count(), adam);
    TrainOptions options;
    options.steps = cfg.get_int("train.steps");
    options.batch = static_cast<std::size_t>(cfg.get_int("train.batch"));
    options.ema_decay = cfg.get_double("train.ema");
    const auto losses = train_ddpm(task.data, model, opt, options, rng);

    save(out_dir / "diffusion.pcdf", to_checkpoint(model, seed_of(cfg)));
    write_file(out_dir / "losses.csv", losses_csv(losses));
    log << "trained diffusion model: " << losses.size() << " steps, final loss " << format_double(losses.back())
        << '\n';
    return int{kOk};
  });
}

int run_train_classifier(const Config& cfg, const fs::path& diffusion_ckpt, const fs::path& out_dir,
                         const std::optional<fs::path>& pairs_csv, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    const DiffusionModel model = load_diffusion(cfg, diffusion_ckpt);
    ensure_dir(out_dir);
    RngStream rng(seed_of(cfg));

    PreferencePairSet pairs;
    if (pairs_csv) {
      std::ifstream is(*pairs_csv);
      if (!is) throw IoError("cannot open pairs file " + pairs_csv->string());
      pairs = read_pairs_csv(is);
      if (pairs.empty()) throw std::invalid_argument("pairs file holds no pairs");
      if (pairs.dim() != model.data_dim) {
        throw std::invalid_argument("pairs dimension " + std::to_string(pairs.dim()) +
                                    " does not match diffusion dimension " + std::to_string(model.data_dim));
      }
    } else {
      const Task task = make_task(cfg, rng);
      pairs = make_preference_pairs(task.data, task.reward, static_cast<std::size_t>(cfg.get_int("data.pairs")), rng);
    }

    PreferenceClassifier clf =
        make_preference_classifier(model.data_dim, cfg.get_sizes("classifier.hidden"),
                                   cfg.get_bool("classifier.time_conditioned"), model.schedule.T(), rng);
    AdamwOptions adam;
    adam.lr = cfg.get_double("classifier.lr");
    AdamwState opt(clf.trunk.parameter_count(), adam);
    ClassifierTrainOptions options;
    options.steps = cfg.get_int("classifier.steps");
    options.batch = static_cast<std::size_t>(cfg.get_int("classifier.batch"));
    options.shared_noise = cfg.get_bool("pc.shared_noise");
    const PcLossConfig loss_cfg{cfg.get_double("pc.beta"), model.schedule.T()};
    const auto losses = train_classifier(clf, pairs, model.schedule, loss_cfg, opt, options, rng);

    save(out_dir / "classifier.pcdf", to_checkpoint(clf, model.schedule, seed_of(cfg)));
    write_file(out_dir / "losses.csv", losses_csv(losses));
    log << "trained classifier: " << losses.size() << " steps on " << pairs.size() << " pairs, final loss "
        << format_double(losses.back()) << '\n';
    return int{kOk};
  });
}

int run_sample(const Config& cfg, const fs::path& diffusion_ckpt, const std::optional<fs::path>& classifier_ckpt,
               const fs::path& out_dir, unsigned threads, std::ostream& log) {
  return guarded(log, [&] {
    cfg.validate();
    const DiffusionModel model = load_diffusion(cfg, diffusion_ckpt);
    const auto n = static_cast<std::size_t>(cfg.get_int("sample.n"));
    Tensor samples;
    std::vector<SamplerTrace> traces;
    if (classifier_ckpt) {
      const PreferenceClassifier clf = load_classifier(model, *classifier_ckpt);
      ConstrainedResult res = constrained_sample(model, clf, guidance_from(cfg), seed_of(cfg), n, threads);
      samples = std::move(res.samples);
      traces = std::move(res.traces);
    } else {
      samples = ddpm_sample(model, seed_of(cfg), n, threads);
    }
    ensure_dir(out_dir);
    write_file(out_dir / "samples.csv", samples_csv(samples));
    write_file(out_dir / "trace.csv", trace_csv(traces));
    log << "wrote " << n << (classifier_ckpt ? " guided" : " unguided") << " samples\n";
    return int{kOk};
  });
}

int run_verify(const std::string& suite, std::uint64_t seed, const std::optional<fs::path>& out_dir,
               std::ostream& log) {
  return guarded(log, [&] {
    std::vector<std::string> names;
    if (suite == "all") {
      names = verify::suite_names();
    } else {
      verify::run_suite(suite, seed);  // validates the name before any output
      names = {suite};
    }
    std::ostringstream text;
    Json report;
    report["seed"] = seed;
    report["suites"] = Json::array();
    std::vector<std::string> failed;
    text << "seed: " << seed << '\n';
    for (const auto& name : names) {
      const verify::SuiteResult r = verify::run_suite(name, seed);
      text << name << ".max_error: " << format_double(r.max_error) << '\n'
           << name << ".bound: " << format_double(r.bound) << '\n';
      Json details = Json::object();
      for (const auto& [k, v] : r.details) {
        text << name << '.' << k << ": " << format_double(v) << '\n';
        details[k] = v;
      }
      text << name << ".status: " << (r.passed ? "pass" : "fail") << '\n';
      report["suites"].push_back(
          Json{{"name", r.name}, {"max_error", r.max_error}, {"bound", r.bound}, {"passed", r.passed}, {"details", details}});
      if (!r.passed) failed.push_back(name);
    }
    report["passed"] = failed.empty();
    text << "overall: " << (failed.empty() ? "pass" : "fail") << '\n';

    log << text.str();
    if (out_dir) {
      ensure_dir(*out_dir);
      write_file(*out_dir / "report.txt", text.str());
      write_file(*out_dir / "report.json", report.dump(2) + "\n");
    }
    if (!failed.empty()) {
      log << "verification failed:";
      for (const auto& f : failed) log << ' ' << f;
      log << '\n';
      return int{kVerificationFailed};
    }
    return int{kOk};
  });
}

int run_eval(const Config& cfg, const fs::path& diffusion_ckpt, const fs::path& classifier_ckpt, std::int64_t n,
             const fs::path& out_dir, unsigned threads, std::ostream& log) {
  return guarded(log, [&] {
    if (n < 1) throw std::invalid_argument("eval: n must be >= 1");
    cfg.validate();
    const DiffusionModel model = load_diffusion(cfg, diffusion_ckpt);
    const PreferenceClassifier clf = load_classifier(model, classifier_ckpt);
    RngStream task_rng(seed_of(cfg));
    const Task task = make_task(cfg, task_rng);

    const auto count = static_cast<std::size_t>(n);
    const ConstrainedResult guided = constrained_sample(model, clf, guidance_from(cfg), seed_of(cfg), count, threads);
    const Tensor unguided = ddpm_sample(model, seed_of(cfg), count, threads);

    double resamples = 0.0;
    double steps = 0.0;
    for (const auto& trace : guided.traces) {
      for (const auto& s : trace) {
        resamples += s.resamples;
        steps += 1.0;
      }
    }
    Json metrics;
    metrics["win_rate"] = win_rate(guided.samples, unguided, task.reward);
    metrics["preferred_mode_mass_guided"] = preferred_fraction(guided.samples, task);
    metrics["preferred_mode_mass_unguided"] = preferred_fraction(unguided, task);
    metrics["mean_resamples"] = steps > 0.0 ? resamples / steps : 0.0;
    ensure_dir(out_dir);
    write_file(out_dir / "metrics.json", metrics.dump(2) + "\n");
    log << metrics.dump(2) << '\n';
    return int{kOk};
  });
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-classifier guided diffusion on toy data"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::int64_t> seed;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::string diffusion;
  std::string classifier;
  std::string pairs;
  std::string suite;
  std::optional<std::int64_t> n;
  unsigned threads = 1;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--set", overrides, "key=value override, repeatable");
    auto* o = sub->add_option("--out", out_dir, "output directory");
    if (needs_out) o->required();
  };

  auto* train_diff = app.add_subcommand("train-diffusion", "train the noise-prediction model");
  common(train_diff, true);

  auto* train_clf = app.add_subcommand("train-classifier", "train the preference classifier");
  common(train_clf, true);
  train_clf->add_option("--diffusion", diffusion, "diffusion checkpoint")->required();
  train_clf->add_option("--pairs", pairs, "preference pairs CSV");

  auto* sample = app.add_subcommand("sample", "draw samples, guided when a classifier is given");
  common(sample, true);
  sample->add_option("--diffusion", diffusion, "diffusion checkpoint")->required();
  sample->add_option("--classifier", classifier, "classifier checkpoint");
  sample->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* verify_cmd = app.add_subcommand("verify", "run oracle verification suites");
  verify_cmd->add_option("--suite", suite, "theorem1 | theorem2 | theorem3 | gradcheck | all")->required();
  verify_cmd->add_option("--seed", seed, "sweep seed");
  verify_cmd->add_option("--out", out_dir, "directory for report.txt and report.json");

  auto* eval = app.add_subcommand("eval", "win rate and preferred-mode mass, guided vs unguided");
  common(eval, true);
  eval->add_option("--diffusion", diffusion, "diffusion checkpoint")->required();
  eval->add_option("--classifier", classifier, "classifier checkpoint")->required();
  eval->add_option("--n", n, "number of paired draws (default sample.n)");
  eval->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }

  if (verify_cmd->parsed()) {
    const auto s = seed.value_or(7);
    if (s < 0) {
      err << "error: --seed must be >= 0\n";
      return kInvalidInput;
    }
    const std::optional<fs::path> dir = out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir);
    return run_verify(suite, static_cast<std::uint64_t>(s), dir, out);
  }

  Config cfg;
  const int load = guarded(err, [&] {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw IoError("cannot open config " + config_path);
      cfg = Config::parse(is);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError(kv, "expected key=value after --set");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.set("seed", std::to_string(*seed));
    cfg.validate();
    return int{kOk};
  });
  if (load != kOk) return load;

  if (train_diff->parsed()) return run_train_diffusion(cfg, out_dir, err);
  if (train_clf->parsed()) {
    const std::optional<fs::path> p = pairs.empty() ? std::nullopt : std::optional<fs::path>(pairs);
    return run_train_classifier(cfg, diffusion, out_dir, p, err);
  }
  if (sample->parsed()) {
    const std::optional<fs::path> c = classifier.empty() ? std::nullopt : std::optional<fs::path>(classifier);
    return run_sample(cfg, diffusion, c, out_dir, threads, err);
  }
  return run_eval(cfg, diffusion, classifier, n.value_or(cfg.get_int("sample.n")), out_dir, threads, err);
}

}  // namespace pcdiff::cli
