#include "pcdiff/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcdiff {

namespace {

struct Batch {
  std::size_t rows;
  std::size_t cols;
};

Batch check_input(const Mlp& net, const Tensor& x) {
  if (net.num_layers() == 0) throw std::invalid_argument("mlp has no layers");
  if (x.rank() != 1 && x.rank() != 2) throw std::invalid_argument("mlp input must be rank 1 or 2");
  if (x.cols() != net.input_dim()) {
    throw std::invalid_argument("mlp input width " + std::to_string(x.cols()) + " != " +
                                std::to_string(net.input_dim()));
  }
  return {x.rows(), x.cols()};
}

// Computes the pre-activation z = a W^T + b for one layer.
void affine(const Mlp& net, std::size_t layer, const std::vector<double>& in, std::size_t rows,
            std::vector<double>& out) {
  const std::size_t n_in = net.layer_sizes()[layer];
  const std::size_t n_out = net.layer_sizes()[layer + 1];
  const auto w = net.weights(layer);
  const auto b = net.biases(layer);
  out.assign(rows * n_out, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* a = in.data() + r * n_in;
    double* z = out.data() + r * n_out;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* wrow = w.data() + o * n_in;
      double acc = b[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += wrow[i] * a[i];
      z[o] = acc;
    }
  }
}

// activations[0] is the input; activations[l+1] is the output of layer l
// (after tanh for hidden layers).
std::vector<std::vector<double>> forward_trace(const Mlp& net, const Tensor& x, std::size_t rows) {
  std::vector<std::vector<double>> acts(net.num_layers() + 1);
  acts[0].assign(x.values().begin(), x.values().end());
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    affine(net, l, acts[l], rows, acts[l + 1]);
    if (l + 1 < net.num_layers()) {
      for (double& v : acts[l + 1]) v = std::tanh(v);
    }
  }
  return acts;
}

Shape output_shape(const Tensor& x, std::size_t rows, std::size_t d_out) {
  if (x.rank() == 1) return {d_out};
  return {rows, d_out};
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("mlp needs at least input and output sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) throw std::invalid_argument("mlp layer sizes must be >= 1");
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> layer_sizes, RngStream& rng) {
  Mlp net(std::move(layer_sizes));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const double fan_in = static_cast<double>(net.sizes_[l]);
    const double fan_out = static_cast<double>(net.sizes_[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : net.weights(l)) w = rng.uniform(-limit, limit);
  }
  return net;
}

std::span<double> Mlp::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(weight_offset(layer), sizes_[layer] * sizes_[layer + 1]);
}

std::span<const double> Mlp::weights(std::size_t layer) const {
  return std::span<const double>(params_).subspan(weight_offset(layer), sizes_[layer] * sizes_[layer + 1]);
}

std::span<double> Mlp::biases(std::size_t layer) {
  return std::span<double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}

std::span<const double> Mlp::biases(std::size_t layer) const {
  return std::span<const double>(params_).subspan(bias_offset(layer), sizes_[layer + 1]);
}

Tensor mlp_forward(const Mlp& net, const Tensor& x) {
  const Batch b = check_input(net, x);
  auto acts = forward_trace(net, x, b.rows);
  return Tensor(output_shape(x, b.rows, net.output_dim()), std::move(acts.back()));
}

MlpTape::MlpTape(const Mlp& net, const Tensor& x) : net_(&net), input_shape_(x.shape()) {
  const Batch b = check_input(net, x);
  rows_ = b.rows;
  acts_ = forward_trace(net, x, rows_);
  output_ = Tensor(output_shape(x, rows_, net.output_dim()), acts_.back());
}

MlpGradients MlpTape::backward(const Tensor& upstream) const {
  if (upstream.shape() != output_.shape()) {
    throw std::invalid_argument("mlp_backward: upstream shape does not match forward output");
  }
  const Mlp& net = *net_;
  const auto& sizes = net.layer_sizes();

  MlpGradients grads;
  grads.params.assign(net.parameter_count(), 0.0);

  std::vector<double> delta(upstream.values().begin(), upstream.values().end());
  std::vector<double> delta_prev;
  for (std::size_t l = net.num_layers(); l-- > 0;) {
    const std::size_t n_in = sizes[l];
    const std::size_t n_out = sizes[l + 1];
    const auto w = net.weights(l);
    double* gw = grads.params.data() + net.weight_offset(l);
    double* gb = grads.params.data() + net.bias_offset(l);
    const std::vector<double>& a_in = acts_[l];

    delta_prev.assign(rows_ * n_in, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* d = delta.data() + r * n_out;
      const double* a = a_in.data() + r * n_in;
      double* dp = delta_prev.data() + r * n_in;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double g = d[o];
        gb[o] += g;
        double* gwrow = gw + o * n_in;
        const double* wrow = w.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
          gwrow[i] += g * a[i];
          dp[i] += g * wrow[i];
        }
      }
    }
    if (l > 0) {
      // a_in = tanh(z) for hidden layers, d tanh = 1 - a^2
      for (std::size_t k = 0; k < delta_prev.size(); ++k) delta_prev[k] *= 1.0 - a_in[k] * a_in[k];
    }
    delta.swap(delta_prev);
  }
  grads.input = Tensor(input_shape_, std::move(delta));
  return grads;
}

MlpGradients mlp_backward(const Mlp& net, const Tensor& x, const Tensor& upstream) {
  return MlpTape(net, x).backward(upstream);
}

}  // namespace pcdiff
