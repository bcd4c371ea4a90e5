#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace pcdiff {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles with a fixed shape.
///
/// Rank-1 tensors stand for single samples; rank-2 tensors are batches laid
/// out as [rows, cols].
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor. Throws std::invalid_argument on an empty shape or a
  /// zero dimension.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor from(std::initializer_list<double> values);
  static Tensor filled(Shape shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rows of a rank-2 tensor; 1 for a rank-1 tensor.
  std::size_t rows() const;
  /// Trailing dimension.
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  /// Copy of row r as a rank-1 tensor.
  Tensor row_tensor(std::size_t r) const;
  /// Same data viewed under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const Shape& shape);

/// a + scale * b, elementwise; shapes must match.
Tensor axpy(const Tensor& a, double scale, const Tensor& b);
Tensor scaled(const Tensor& a, double scale);

/// Stack equal-length rank-1 tensors into a [n, d] batch.
Tensor stack_rows(std::span<const Tensor> rows);

}  // namespace pcdiff
