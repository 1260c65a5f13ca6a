#include "amenable/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace amenable {

double standard_normal(Rng& rng) {
  // 1 - u keeps the argument of log in (0, 1].
  const double u1 = 1.0 - uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace amenable

namespace amenable::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape_string(shape_));
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_))
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string(shape_));
}

std::size_t Tensor::sample_size() const {
  if (shape_.empty()) return 0;
  return data_.size() / shape_[0];
}

std::span<Real> Tensor::sample(std::size_t n) {
  const auto s = sample_size();
  return std::span<Real>(data_).subspan(n * s, s);
}

std::span<const Real> Tensor::sample(std::size_t n) const {
  const auto s = sample_size();
  return std::span<const Real>(data_).subspan(n * s, s);
}

Shape Tensor::sample_shape() const {
  if (shape_.empty()) return {};
  return Shape(shape_.begin() + 1, shape_.end());
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::gather(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw ShapeError("gather needs at least one row");
  Shape out_shape = shape_;
  out_shape[0] = rows.size();
  const auto s = sample_size();
  std::vector<Real> out(rows.size() * s);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= batch()) throw ShapeError("gather row out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(rows[i] * s), s,
                out.begin() + static_cast<std::ptrdiff_t>(i * s));
  }
  return Tensor(std::move(out_shape), std::move(out));
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

void Tensor::fill(Real v) noexcept { std::fill(data_.begin(), data_.end(), v); }

}  // namespace amenable::nn
