#include "pcdiff/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pcdiff {

std::size_t shape_product(const Shape& shape) {
  if (shape.empty()) throw std::invalid_argument("tensor shape must be nonempty");
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be >= 1");
    n *= d;
  }
  return n;
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape product");
  }
}

Tensor Tensor::from(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::filled(Shape shape, double value) {
  Tensor t(std::move(shape));
  for (double& v : t.data_) v = value;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw std::invalid_argument("rows() requires a rank-1 or rank-2 tensor");
}

std::size_t Tensor::cols() const { return shape_.back(); }

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

Tensor Tensor::row_tensor(std::size_t r) const {
  auto src = row(r);
  return Tensor({src.size()}, std::vector<double>(src.begin(), src.end()));
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor axpy(const Tensor& a, double scale, const Tensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("axpy: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * b[i];
  return out;
}

Tensor scaled(const Tensor& a, double scale) {
  Tensor out = a;
  for (double& v : out.values()) v *= scale;
  return out;
}

Tensor stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw std::invalid_argument("stack_rows: no rows");
  const std::size_t d = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * d);
  for (const Tensor& r : rows) {
    if (r.size() != d) throw std::invalid_argument("stack_rows: ragged rows");
    data.insert(data.end(), r.values().begin(), r.values().end());
  }
  return Tensor({rows.size(), d}, std::move(data));
}

}  // namespace pcdiff
