#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "pcdiff/rng.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

/// Fully connected network: tanh on hidden layers, identity on the output.
///
/// All parameters live in one flat buffer so the optimizer and checkpoint
/// code can treat them as a single vector. Layer l occupies
/// [W_l (out x in, row-major) | b_l (out)].
class Mlp {
 public:
  Mlp() = default;
  /// Zero-initialized network. Needs at least two layer sizes, all >= 1.
  explicit Mlp(std::vector<std::size_t> layer_sizes);

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<std::size_t> layer_sizes, RngStream& rng);

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t num_layers() const noexcept { return sizes_.empty() ? 0 : sizes_.size() - 1; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  std::size_t weight_offset(std::size_t layer) const { return offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_.at(layer) + sizes_[layer] * sizes_[layer + 1];
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

struct MlpGradients {
  /// Same layout as Mlp::parameters().
  std::vector<double> params;
  /// Same shape as the input batch.
  Tensor input;
};

/// Activations of one forward pass, kept so the matching backward pass can
/// reuse them. Holds a reference to the network; do not outlive it.
class MlpTape {
 public:
  MlpTape(const Mlp& net, const Tensor& x);

  /// Network output, same rank as the recorded input.
  const Tensor& output() const noexcept { return output_; }
  MlpGradients backward(const Tensor& upstream) const;

 private:
  const Mlp* net_;
  Shape input_shape_;
  std::size_t rows_;
  std::vector<std::vector<double>> acts_;
  Tensor output_;
};

/// Evaluates the network on x, which is [batch, d_in] or a single [d_in]
/// sample; the result has the matching rank.
Tensor mlp_forward(const Mlp& net, const Tensor& x);

/// Gradients of <upstream, mlp_forward(net, x)> with respect to every
/// parameter and to x. Runs its own forward pass.
MlpGradients mlp_backward(const Mlp& net, const Tensor& x, const Tensor& upstream);

}  // namespace pcdiff
