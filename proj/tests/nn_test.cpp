#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "pcdiff/adamw.hpp"
#include "pcdiff/errors.hpp"
#include "pcdiff/mlp.hpp"
#include "pcdiff/rng.hpp"
#include "pcdiff/tensor.hpp"
#include "test_util.hpp"

namespace pcdiff {
namespace {

using testing::central_difference;
using testing::contracted_output;
using testing::reference_forward;
using testing::relative_error;

TEST(Tensor, ShapeMatchesDataLength) {
  Tensor t({3, 4});
  EXPECT_EQ(t.size(), 12u);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3)), std::invalid_argument);
}

TEST(Tensor, RejectsEmptyOrZeroShapes) {
  EXPECT_THROW(Tensor(Shape{}), std::invalid_argument);
  EXPECT_THROW(Tensor(Shape{2, 0}), std::invalid_argument);
}

TEST(Tensor, ReshapeKeepsData) {
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor r = t.reshaped({3, 2});
  EXPECT_EQ(r.at(2, 1), 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), std::invalid_argument);
}

TEST(Rng, SameSeedSameDraws) {
  RngStream a(7);
  RngStream b(7);
  EXPECT_EQ(a.gaussian({3}), b.gaussian({3}));
}

TEST(Rng, ShapeContract) {
  RngStream rng(123);
  const Tensor t = rng.gaussian({2, 2});
  EXPECT_EQ(t.shape(), (Shape{2, 2}));
  EXPECT_EQ(t.size(), 4u);
}

TEST(Rng, ZeroSizedShapeThrows) {
  RngStream rng(1);
  EXPECT_THROW(rng.gaussian({0}), std::invalid_argument);
  EXPECT_THROW(rng.gaussian(Shape{}), std::invalid_argument);
}

TEST(Rng, LargeSampleMoments) {
  RngStream rng(7);
  const Tensor t = rng.gaussian({100000});
  const auto v = t.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
  EXPECT_GT(mean, -0.02);
  EXPECT_LT(mean, 0.02);
  EXPECT_GT(var, 0.97);
  EXPECT_LT(var, 1.03);
}

TEST(Rng, SerializedStateResumesExactly) {
  RngStream a(99);
  a.gaussian({5});
  RngStream b = RngStream::deserialize(a.serialize());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.gaussian({7}), b.gaussian({7}));
  EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DerivedStreamsAreDistinctAndReproducible) {
  RngStream a = RngStream::derived(7, 0);
  RngStream b = RngStream::derived(7, 1);
  RngStream c = RngStream::derived(7, 0);
  const Tensor ta = a.gaussian({4});
  EXPECT_NE(ta, b.gaussian({4}));
  EXPECT_EQ(ta, c.gaussian({4}));
}

TEST(Mlp, ParameterCountFormula) {
  const Mlp net({3, 5, 2});
  EXPECT_EQ(net.parameter_count(), 3u * 5 + 5 + 5 * 2 + 2);
  EXPECT_THROW(Mlp({3}), std::invalid_argument);
  EXPECT_THROW(Mlp({3, 0, 1}), std::invalid_argument);
}

TEST(Mlp, ZeroNetworkGivesZeroOutput) {
  const Mlp net({2, 4, 3});
  RngStream rng(5);
  const Tensor y = mlp_forward(net, rng.gaussian({6, 2}));
  EXPECT_EQ(y.shape(), (Shape{6, 3}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, IdentityLinearLayer) {
  Mlp net({3, 3});
  auto w = net.weights(0);
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const Tensor x({2, 3}, {1.5, -2.0, 0.25, 3.0, 4.0, -5.0});
  EXPECT_EQ(mlp_forward(net, x), x);
}

TEST(Mlp, DimensionMismatchThrows) {
  const Mlp net({2, 4, 1});
  EXPECT_THROW(mlp_forward(net, Tensor({3, 3})), std::invalid_argument);
  EXPECT_THROW(mlp_backward(net, Tensor({3, 2}), Tensor({3, 2})), std::invalid_argument);
}

TEST(Mlp, MatchesStraightLineReference) {
  RngStream rng(11);
  const Mlp net = Mlp::glorot({2, 16, 1}, rng);
  const Tensor x = rng.gaussian({32, 2});
  const Tensor y = mlp_forward(net, x);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    EXPECT_NEAR(y.at(r, 0), reference_forward(net, x.row(r))[0], 1e-12);
  }
}

TEST(Mlp, SingleSampleKeepsRank) {
  RngStream rng(3);
  const Mlp net = Mlp::glorot({2, 8, 3}, rng);
  const Tensor x = rng.gaussian({2});
  const Tensor y = mlp_forward(net, x);
  ASSERT_EQ(y.shape(), (Shape{3}));
  const auto ref = reference_forward(net, x.values());
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(y[k], ref[k], 1e-12);
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradients) {
  RngStream rng(2);
  const Mlp net = Mlp::glorot({2, 8, 8, 1}, rng);
  const Tensor x = rng.gaussian({4, 2});
  const MlpGradients g = mlp_backward(net, x, Tensor({4, 1}));
  for (double v : g.params) EXPECT_EQ(v, 0.0);
  for (double v : g.input.values()) EXPECT_EQ(v, 0.0);
}

TEST(MlpBackward, LinearLayerClosedForm) {
  Mlp net({2, 3});
  const std::vector<double> W{1, 2, 3, 4, 5, 6};  // 3 x 2
  std::copy(W.begin(), W.end(), net.weights(0).begin());
  const Tensor x({1, 2}, {0.5, -1.0});
  const Tensor u({1, 3}, {1.0, -2.0, 0.5});
  const MlpGradients g = mlp_backward(net, x, u);
  // input grad = W^T u
  EXPECT_DOUBLE_EQ(g.input[0], 1 * 1.0 + 3 * -2.0 + 5 * 0.5);
  EXPECT_DOUBLE_EQ(g.input[1], 2 * 1.0 + 4 * -2.0 + 6 * 0.5);
  const auto off = net.bias_offset(0);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_DOUBLE_EQ(g.params[off + k], u[k]);
  // weight grad = u x^T
  EXPECT_DOUBLE_EQ(g.params[net.weight_offset(0) + 1], 1.0 * -1.0);
}

TEST(MlpBackward, FiniteDifferences2x8x8x1) {
  RngStream rng(21);
  Mlp net = Mlp::glorot({2, 8, 8, 1}, rng);
  const Tensor x = rng.gaussian({3, 2});
  const Tensor u = rng.gaussian({3, 1});
  const MlpGradients g = mlp_backward(net, x, u);
  auto params = net.parameters();
  const auto f = [&] { return contracted_output(net, x, u); };
  for (std::size_t i = 0; i < params.size(); ++i) {
    EXPECT_LE(relative_error(g.params[i], central_difference(f, params[i])), 1e-5) << "param " << i;
  }
}

TEST(MlpBackward, FiniteDifferencesRandomInstances) {
  RngStream rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    std::vector<std::size_t> sizes{static_cast<std::size_t>(rng.uniform_int(1, 4))};
    const auto hidden = rng.uniform_int(1, 3);
    for (std::int64_t h = 0; h < hidden; ++h) sizes.push_back(static_cast<std::size_t>(rng.uniform_int(2, 16)));
    sizes.push_back(static_cast<std::size_t>(rng.uniform_int(1, 3)));
    Mlp net = Mlp::glorot(sizes, rng);
    for (double& p : net.parameters()) p += 0.1 * rng.gaussian();
    const std::size_t rows = static_cast<std::size_t>(rng.uniform_int(1, 4));
    Tensor x = rng.gaussian({rows, sizes.front()});
    const Tensor u = rng.gaussian({rows, sizes.back()});
    const MlpGradients g = mlp_backward(net, x, u);
    const auto f = [&] { return contracted_output(net, x, u); };
    auto params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      worst = std::max(worst, relative_error(g.params[i], central_difference(f, params[i])));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, relative_error(g.input[i], central_difference(f, x[i])));
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(MlpBackward, TapeUsesItsOwnForwardPass) {
  RngStream rng(8);
  const Mlp net = Mlp::glorot({2, 6, 1}, rng);
  const Tensor x1 = rng.gaussian({2, 2});
  const Tensor x2 = rng.gaussian({2, 2});
  const Tensor u = rng.gaussian({2, 1});
  const MlpTape tape1(net, x1);
  const MlpTape tape2(net, x2);
  EXPECT_EQ(tape1.backward(u).params, mlp_backward(net, x1, u).params);
  EXPECT_EQ(tape2.backward(u).params, mlp_backward(net, x2, u).params);
  EXPECT_EQ(tape1.output(), mlp_forward(net, x1));
}

TEST(Adamw, ZeroGradientNoDecayLeavesParameters) {
  std::vector<double> p{1.0, -2.0, 3.0};
  AdamwState s(3, AdamwOptions{0.1, 0.9, 0.999, 1e-8, 0.0});
  adamw_step(s, p, std::vector<double>(3, 0.0));
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(s.step, 1);
}

TEST(Adamw, DecoupledDecayActsAlone) {
  std::vector<double> p{1.0, -2.0, 3.0};
  AdamwState s(3, AdamwOptions{0.1, 0.9, 0.999, 1e-8, 0.01});
  adamw_step(s, p, std::vector<double>(3, 0.0));
  EXPECT_DOUBLE_EQ(p[0], 1.0 * (1 - 0.001));
  EXPECT_DOUBLE_EQ(p[1], -2.0 * (1 - 0.001));
  EXPECT_DOUBLE_EQ(p[2], 3.0 * (1 - 0.001));
}

TEST(Adamw, FirstStepHandComputed) {
  std::vector<double> p{1.0};
  AdamwState s(1, AdamwOptions{1e-3, 0.9, 0.999, 1e-8, 0.0});
  adamw_step(s, p, std::vector<double>{1.0});
  // m_hat = 1, v_hat = 1 after bias correction, so p = 1 - lr / (1 + eps).
  EXPECT_NEAR(p[0], 0.99900000001, 1e-15);
}

TEST(Adamw, StepCounterIncrements) {
  std::vector<double> p{0.5, 0.5};
  AdamwState s(2, AdamwOptions{});
  for (int k = 1; k <= 4; ++k) {
    adamw_step(s, p, std::vector<double>{0.1, -0.2});
    EXPECT_EQ(s.step, k);
  }
  EXPECT_EQ(s.first_moment.size(), p.size());
  EXPECT_EQ(s.second_moment.size(), p.size());
}

TEST(Adamw, NanGradientNamesIndexAndLeavesStateUntouched) {
  std::vector<double> p{1.0, 2.0, 3.0};
  AdamwState s(3, AdamwOptions{});
  const std::vector<double> g{0.1, std::numeric_limits<double>::quiet_NaN(), 0.3};
  try {
    adamw_step(s, p, g);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.index(), 1u);
  }
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(s.step, 0);
}

TEST(Adamw, ShapeMismatchThrows) {
  std::vector<double> p{1.0, 2.0};
  AdamwState s(2, AdamwOptions{});
  EXPECT_THROW(adamw_step(s, p, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Warmup, LinearRampThenConstant) {
  const WarmupSchedule w(2000, 0.05);
  EXPECT_EQ(w.warmup_steps(), 100);
  EXPECT_DOUBLE_EQ(w.scale(0), 1.0 / 100);
  EXPECT_DOUBLE_EQ(w.scale(49), 0.5);
  EXPECT_DOUBLE_EQ(w.scale(99), 1.0);
  EXPECT_DOUBLE_EQ(w.scale(1500), 1.0);
}

TEST(Determinism, SeededTrainingIsBitIdentical) {
  auto run = [] {
    RngStream rng(17);
    Mlp net = Mlp::glorot({2, 8, 1}, rng);
    AdamwState s(net.parameter_count(), AdamwOptions{});
    for (int k = 0; k < 20; ++k) {
      const Tensor x = rng.gaussian({4, 2});
      const Tensor u = rng.gaussian({4, 1});
      adamw_step(s, net.parameters(), mlp_backward(net, x, u).params);
    }
    return std::vector<double>(net.parameters().begin(), net.parameters().end());
  };
  EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace pcdiff
