#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amenable/common.hpp"

namespace amenable::nn {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major tensor of 64-bit reals. Dimension 0 is the batch axis
/// wherever a tensor holds several samples; images are laid out N x C x H x W.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0.0);
  Tensor(Shape shape, std::vector<Real> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<Real> values() noexcept { return data_; }
  std::span<const Real> values() const noexcept { return data_; }
  Real* data() noexcept { return data_.data(); }
  const Real* data() const noexcept { return data_.data(); }

  Real& operator[](std::size_t i) noexcept { return data_[i]; }
  Real operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Number of samples along axis 0.
  std::size_t batch() const { return shape_.empty() ? 0 : shape_[0]; }
  /// Elements per sample (product of all dims but the first).
  std::size_t sample_size() const;
  std::span<Real> sample(std::size_t n);
  std::span<const Real> sample(std::size_t n) const;
  /// Shape of one sample (drops axis 0).
  Shape sample_shape() const;

  /// Same data, new shape of equal size.
  Tensor reshaped(Shape shape) const;
  /// Rows of axis 0, in the given order (repeats allowed).
  Tensor gather(std::span<const std::size_t> rows) const;

  bool all_finite() const noexcept;
  void fill(Real v) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

}  // namespace amenable::nn
