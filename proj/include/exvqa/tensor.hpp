#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "exvqa/error.hpp"

namespace exvqa {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& dims);

/// Dense row-major array. Values are always finite; the optional gradient
/// buffer, when present, mirrors the value shape.
template <class T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : dims_{1}, data_(1, T(0)) {}

  static BasicTensor zeros(Shape dims) { return BasicTensor(std::move(dims), T(0)); }
  static BasicTensor full(Shape dims, T v) { return BasicTensor(std::move(dims), v); }

  /// Validates extents, element count, and finiteness.
  static BasicTensor from(Shape dims, std::vector<T> data) {
    check_dims(dims);
    if (element_count(dims) != data.size())
      throw DimensionError("tensor " + shape_str(dims) + " needs " + std::to_string(element_count(dims)) +
                           " values, got " + std::to_string(data.size()));
    for (T v : data)
      if (!std::isfinite(v)) throw ContractError("tensor constructed with non-finite value");
    BasicTensor t;
    t.dims_ = std::move(dims);
    t.data_ = std::move(data);
    return t;
  }

  const Shape& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  /// Extent of the last axis.
  std::size_t cols() const noexcept { return dims_.back(); }
  /// Product of all leading axes.
  std::size_t rows() const noexcept { return data_.size() / dims_.back(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  T at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(data_).subspan(r * cols(), cols()); }

  bool requires_grad() const noexcept { return requires_grad_; }
  void set_requires_grad(bool on) {
    requires_grad_ = on;
    if (!on) grad_.clear();
  }
  bool has_grad() const noexcept { return !grad_.empty(); }
  std::span<T> grad() noexcept { return grad_; }
  std::span<const T> grad() const noexcept { return grad_; }
  /// Allocates (or resets) the gradient buffer to zeros.
  void zero_grad() { grad_.assign(data_.size(), T(0)); }
  void clear_grad() { grad_.clear(); }

  bool same_values(const BasicTensor& o) const { return dims_ == o.dims_ && data_ == o.data_; }

 private:
  BasicTensor(Shape dims, T v) : dims_(std::move(dims)) {
    check_dims(dims_);
    data_.assign(element_count(dims_), v);
  }

  static void check_dims(const Shape& dims) {
    if (dims.empty()) throw DimensionError("tensor needs at least one axis");
    for (std::size_t d : dims)
      if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_str(dims));
  }
  static std::size_t element_count(const Shape& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  }

  Shape dims_;
  std::vector<T> data_;
  bool requires_grad_ = false;
  std::vector<T> grad_;
};

using Tensor = BasicTensor<float>;

}  // namespace exvqa
