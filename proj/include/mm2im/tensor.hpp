#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mm2im/error.hpp"
#include "mm2im/shape.hpp"

namespace mm2im {

/// Dense row-major tensor of rank 3 or 4.
///
/// Layouts used throughout the library:
///   input   (i_h, i_w, i_c)        int8
///   filters (ks, ks, o_c, i_c)     int8
///   output  (o_h, o_w, o_c)        int8, or int32 for accumulators
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> dims, T fill = T{})
      : dims_(std::move(dims)), data_(count(dims_), fill) {
    if (dims_.size() != 3 && dims_.size() != 4) {
      throw shape_error("tensor rank must be 3 or 4, got " + std::to_string(dims_.size()));
    }
  }

  Tensor(std::initializer_list<std::size_t> dims, T fill = T{})
      : Tensor(std::vector<std::size_t>(dims), fill) {}

  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_.at(i); }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::size_t offset(std::size_t a, std::size_t b, std::size_t c) const noexcept {
    return (a * dims_[1] + b) * dims_[2] + c;
  }
  std::size_t offset(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const noexcept {
    return ((a * dims_[1] + b) * dims_[2] + c) * dims_[3] + d;
  }

  T& at(std::size_t a, std::size_t b, std::size_t c) noexcept { return data_[offset(a, b, c)]; }
  const T& at(std::size_t a, std::size_t b, std::size_t c) const noexcept {
    return data_[offset(a, b, c)];
  }
  T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) noexcept {
    return data_[offset(a, b, c, d)];
  }
  const T& at(std::size_t a, std::size_t b, std::size_t c, std::size_t d) const noexcept {
    return data_[offset(a, b, c, d)];
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t count(const std::vector<std::size_t>& dims) {
    return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>{});
  }

  std::vector<std::size_t> dims_;
  std::vector<T> data_;
};

using Int8Tensor = Tensor<std::int8_t>;
using AccTensor = Tensor<std::int32_t>;

inline Int8Tensor make_input(const TConvShape& sh) {
  return Int8Tensor({std::size_t(sh.i_h), std::size_t(sh.i_w), std::size_t(sh.i_c)});
}
inline Int8Tensor make_filters(const TConvShape& sh) {
  return Int8Tensor(
      {std::size_t(sh.ks), std::size_t(sh.ks), std::size_t(sh.o_c), std::size_t(sh.i_c)});
}
inline Int8Tensor make_output(const TConvShape& sh) {
  return Int8Tensor({std::size_t(sh.o_h), std::size_t(sh.o_w), std::size_t(sh.o_c)});
}

namespace detail {

template <typename T>
void expect_dims(const Tensor<T>& t, std::vector<std::size_t> want, const char* what) {
  if (t.dims() != want) {
    std::string msg = std::string(what) + " dims mismatch: expected (";
    for (std::size_t i = 0; i < want.size(); ++i) msg += (i ? "," : "") + std::to_string(want[i]);
    msg += "), got (";
    for (std::size_t i = 0; i < t.rank(); ++i) msg += (i ? "," : "") + std::to_string(t.dim(i));
    throw shape_error(msg + ")");
  }
}

}  // namespace detail

inline void check_input(const TConvShape& sh, const Int8Tensor& input) {
  detail::expect_dims(input, {std::size_t(sh.i_h), std::size_t(sh.i_w), std::size_t(sh.i_c)},
                      "input");
}

inline void check_filters(const TConvShape& sh, const Int8Tensor& filters) {
  detail::expect_dims(
      filters,
      {std::size_t(sh.ks), std::size_t(sh.ks), std::size_t(sh.o_c), std::size_t(sh.i_c)},
      "filters");
}

}  // namespace mm2im
