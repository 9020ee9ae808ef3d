#pragma once

#include <cstdint>
#include <random>

#include "mm2im/mm2im.hpp"

namespace mm2im::test {

inline Int8Tensor filled(Int8Tensor t, std::int8_t v) {
  for (auto& e : t.data()) e = v;
  return t;
}

inline Int8Tensor random_fill(Int8Tensor t, std::mt19937_64& rng, int lo = -128, int hi = 127) {
  std::uniform_int_distribution<int> d(lo, hi);
  for (auto& e : t.data()) e = std::int8_t(d(rng));
  return t;
}

inline Int8Tensor run_sim(const TConvShape& sh, const QuantParams& q, const Int8Tensor& in,
                          const Int8Tensor& w, const SimConfig& cfg = {}) {
  Simulator sim(cfg);
  return run_layer(plan_layer(sh, q, in, w, cfg), sim).output;
}

inline const TConvShape kWorked = derive_shape(2, 2, 2, 3, 2, 1);

}  // namespace mm2im::test
