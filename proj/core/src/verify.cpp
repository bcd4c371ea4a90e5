#include "pcdiff/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "pcdiff/classifier.hpp"
#include "pcdiff/mlp.hpp"
#include "pcdiff/oracle.hpp"
#include "pcdiff/rng.hpp"

namespace pcdiff::verify {

namespace {

constexpr double kTheorem1Bound = 1e-10;
constexpr double kTheorem2Bound = 1e-12;
constexpr double kTheorem3Bound = 0.05;
constexpr double kGridStability = 1e-8;
constexpr double kGradBound = 1e-5;
constexpr double kGradFloor = 1e-4;

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
}

double central_difference(const std::function<double()>& f, double& coordinate) {
  const double saved = coordinate;
  const double h = 1e-5 * (1.0 + std::abs(saved));
  coordinate = saved + h;
  const double up = f();
  coordinate = saved - h;
  const double down = f();
  coordinate = saved;
  return (up - down) / (2.0 * h);
}

double contracted(const Mlp& net, const Tensor& x, const Tensor& upstream) {
  const Tensor y = mlp_forward(net, x);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += upstream[i] * y[i];
  return acc;
}

std::vector<std::size_t> random_widths(RngStream& rng, std::size_t in, std::size_t out) {
  std::vector<std::size_t> sizes{in};
  const auto hidden = rng.uniform_int(1, 3);
  for (std::int64_t h = 0; h < hidden; ++h) sizes.push_back(static_cast<std::size_t>(rng.uniform_int(2, 12)));
  sizes.push_back(out);
  return sizes;
}

double mlp_instance_error(RngStream& rng) {
  const auto in = static_cast<std::size_t>(rng.uniform_int(1, 4));
  const auto out = static_cast<std::size_t>(rng.uniform_int(1, 3));
  const auto rows = static_cast<std::size_t>(rng.uniform_int(1, 3));
  Mlp net = Mlp::glorot(random_widths(rng, in, out), rng);
  for (double& b : net.parameters()) b += 0.1 * rng.gaussian();
  Tensor x = rng.gaussian({rows, in});
  const Tensor upstream = rng.gaussian({rows, out});

  const MlpGradients g = mlp_backward(net, x, upstream);
  const auto f = [&] { return contracted(net, x, upstream); };
  double worst = 0.0;
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    worst = std::max(worst, relative_error(g.params[i], central_difference(f, params[i])));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    worst = std::max(worst, relative_error(g.input[i], central_difference(f, x[i])));
  }
  return worst;
}

double classifier_instance_error(RngStream& rng) {
  const auto d = static_cast<std::size_t>(rng.uniform_int(1, 4));
  const bool tc = rng.uniform() < 0.5;
  const int horizon = 50;
  const std::vector<std::size_t> hidden{static_cast<std::size_t>(rng.uniform_int(2, 16)),
                                        static_cast<std::size_t>(rng.uniform_int(2, 16))};
  const PreferenceClassifier clf = make_preference_classifier(d, hidden, tc, horizon, rng);
  const int t = static_cast<int>(rng.uniform_int(1, horizon));
  Tensor x = rng.gaussian({d});

  const LogScoreGradient g = log_score_grad(clf, x, t);
  const auto f = [&] { return log_score(clf, x, t); };
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    worst = std::max(worst, relative_error(g.grad[i], central_difference(f, x[i])));
  }
  return worst;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"theorem1", "theorem2", "theorem3", "gradcheck"};
  return names;
}

SuiteResult theorem1_suite(std::uint64_t seed) {
  RngStream rng(seed);
  SuiteResult r{"theorem1", 0.0, kTheorem1Bound, false, {}};
  double chains = 0;
  for (int k = 0; k < 100; ++k) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 16));
    const int T = static_cast<int>(rng.uniform_int(1, 8));
    const auto chain = oracle::random_chain(n, T, rng);
    r.max_error = std::max(r.max_error, oracle::verify_theorem1(chain).max_error);
    ++chains;
  }
  r.passed = r.max_error <= r.bound;
  r.details = {{"chains", chains}};
  return r;
}

SuiteResult theorem2_suite(std::uint64_t seed) {
  RngStream rng(seed);
  SuiteResult r{"theorem2", 0.0, kTheorem2Bound, false, {}};
  double tuples = 0;
  double loss_diff = 0.0;
  for (int k = 0; k < 10; ++k) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(2, 16));
    const int T = static_cast<int>(rng.uniform_int(1, 8));
    const auto chain = oracle::random_chain(n, T, rng);
    const auto rep = oracle::verify_dpo_equivalence(chain, 100, 0.1, rng);
    r.max_error = std::max(r.max_error, rep.max_abs_diff);
    loss_diff = std::max(loss_diff, rep.max_loss_diff);
    tuples += static_cast<double>(rep.tuples);
  }
  r.passed = r.max_error <= r.bound;
  r.details = {{"tuples", tuples}, {"max_loss_diff", loss_diff}};
  return r;
}

SuiteResult theorem3_suite(std::uint64_t /*seed*/) {
  const std::array<double, 3> variances{0.04, 0.01, 0.0025};
  const auto logscore = oracle::log_sigmoid_score();
  const oracle::QuadratureGrid grid(-3.0, 3.0, 20001);
  const oracle::QuadratureGrid fine(-3.0, 3.0, 40001);
  const auto coarse_rep = oracle::verify_theorem3(0.0, variances, logscore, grid);
  const auto fine_rep = oracle::verify_theorem3(0.0, variances, logscore, fine);

  SuiteResult r{"theorem3", coarse_rep.tv_distances.back(), kTheorem3Bound, false, {}};
  bool decreasing = true;
  double drift = 0.0;
  for (std::size_t k = 0; k < variances.size(); ++k) {
    if (k > 0 && !(coarse_rep.tv_distances[k] < coarse_rep.tv_distances[k - 1])) decreasing = false;
    drift = std::max(drift, std::abs(coarse_rep.tv_distances[k] - fine_rep.tv_distances[k]));
    r.details.emplace_back("tv_sigma2_" + std::to_string(k), coarse_rep.tv_distances[k]);
  }
  r.details.emplace_back("strictly_decreasing", decreasing ? 1.0 : 0.0);
  r.details.emplace_back("grid_doubling_drift", drift);
  r.passed = decreasing && r.max_error <= r.bound && drift <= kGridStability;
  return r;
}

SuiteResult gradcheck_suite(std::uint64_t seed) {
  RngStream rng(seed);
  double mlp_worst = 0.0;
  double clf_worst = 0.0;
  for (int k = 0; k < 100; ++k) mlp_worst = std::max(mlp_worst, mlp_instance_error(rng));
  for (int k = 0; k < 100; ++k) clf_worst = std::max(clf_worst, classifier_instance_error(rng));
  SuiteResult r{"gradcheck", std::max(mlp_worst, clf_worst), kGradBound, false, {}};
  r.details = {{"mlp_backward_max_rel_error", mlp_worst}, {"log_score_grad_max_rel_error", clf_worst}};
  r.passed = r.max_error <= r.bound;
  return r;
}

SuiteResult run_suite(std::string_view name, std::uint64_t seed) {
  if (name == "theorem1") return theorem1_suite(seed);
  if (name == "theorem2") return theorem2_suite(seed);
  if (name == "theorem3") return theorem3_suite(seed);
  if (name == "gradcheck") return gradcheck_suite(seed);
  throw std::invalid_argument("unknown verification suite '" + std::string(name) + "'");
}

}  // namespace pcdiff::verify
