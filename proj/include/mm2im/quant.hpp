#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mm2im/error.hpp"
#include "mm2im/shape.hpp"

namespace mm2im {

/// Fixed-point realization of a positive real multiplier:
/// real ~= multiplier * 2^(shift - 31), multiplier in [2^30, 2^31).
struct FixedPointMultiplier {
  std::int32_t multiplier = 0;
  int shift = 0;
};

inline constexpr int kMinRequantShift = -31;
inline constexpr int kMaxRequantShift = 30;

/// Splits `real` into a Q31 mantissa and a power-of-two exponent.
/// Ratios too small to represent collapse to a zero multiplier.
inline FixedPointMultiplier quantize_multiplier(double real) {
  if (!(real > 0.0) || !std::isfinite(real)) {
    throw error("requantization multiplier must be a positive finite real");
  }
  int shift = 0;
  const double mantissa = std::frexp(real, &shift);  // [0.5, 1)
  auto q = static_cast<std::int64_t>(std::llround(mantissa * double(std::int64_t{1} << 31)));
  if (q == (std::int64_t{1} << 31)) {
    q /= 2;
    ++shift;
  }
  if (shift < kMinRequantShift) return {0, 0};
  if (shift > kMaxRequantShift) {
    throw error("requantization multiplier " + std::to_string(real) + " is out of range");
  }
  return {static_cast<std::int32_t>(q), shift};
}

/// Per-tensor affine int8 quantization with per-channel int32 bias.
///
/// Accumulators hold bias[c] + sum((x - input_zero) * w); weights are
/// symmetric (zero point 0).
struct QuantParams {
  double input_scale = 1.0;
  double weight_scale = 1.0;
  double output_scale = 1.0;
  std::int32_t input_zero = 0;
  std::int32_t output_zero = 0;
  std::vector<std::int32_t> bias;
  std::int32_t requant_multiplier = 0;
  int requant_shift = 0;

  double real_multiplier() const { return input_scale * weight_scale / output_scale; }
};

inline QuantParams make_quant(double input_scale, double weight_scale, double output_scale,
                              std::int32_t input_zero, std::int32_t output_zero,
                              std::vector<std::int32_t> bias) {
  if (!(input_scale > 0) || !(weight_scale > 0) || !(output_scale > 0)) {
    throw error("quantization scales must be positive");
  }
  QuantParams q;
  q.input_scale = input_scale;
  q.weight_scale = weight_scale;
  q.output_scale = output_scale;
  q.input_zero = input_zero;
  q.output_zero = output_zero;
  q.bias = std::move(bias);
  const auto fp = quantize_multiplier(q.real_multiplier());
  q.requant_multiplier = fp.multiplier;
  q.requant_shift = fp.shift;
  return q;
}

/// Unit scales, zero offsets, zero bias: requantize() then only saturates.
inline QuantParams unit_quant(int o_c) {
  return make_quant(1.0, 1.0, 1.0, 0, 0, std::vector<std::int32_t>(std::size_t(o_c), 0));
}

inline void check_quant(const TConvShape& sh, const QuantParams& q) {
  if (q.bias.size() != std::size_t(sh.o_c)) {
    throw shape_error("bias has " + std::to_string(q.bias.size()) + " entries, expected o_c=" +
                      std::to_string(sh.o_c));
  }
  auto in_i8 = [](std::int32_t v) { return v >= -128 && v <= 127; };
  if (!in_i8(q.input_zero) || !in_i8(q.output_zero)) {
    throw error("zero points must fit in int8");
  }
  if (q.requant_multiplier < 0 || q.requant_shift < kMinRequantShift ||
      q.requant_shift > kMaxRequantShift) {
    throw error("requantization multiplier/shift out of range");
  }
}

inline std::int8_t saturate_int8(std::int64_t v) noexcept {
  return static_cast<std::int8_t>(v < -128 ? -128 : (v > 127 ? 127 : v));
}

/// acc -> round_half_away(acc * multiplier / 2^(31 - shift)) + output_zero,
/// saturated to int8.
inline std::int8_t requantize(std::int32_t acc, std::int32_t multiplier, int shift,
                              std::int32_t output_zero) noexcept {
  const int total_shift = 31 - shift;  // [1, 62]
  const std::int64_t prod = std::int64_t{acc} * multiplier;
  const std::int64_t mag = prod < 0 ? -prod : prod;
  std::int64_t scaled = (mag + (std::int64_t{1} << (total_shift - 1))) >> total_shift;
  if (prod < 0) scaled = -scaled;
  return saturate_int8(scaled + output_zero);
}

inline std::int8_t requantize(std::int32_t acc, const QuantParams& q) noexcept {
  return requantize(acc, q.requant_multiplier, q.requant_shift, q.output_zero);
}

}  // namespace mm2im
