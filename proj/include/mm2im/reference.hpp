#pragma once

#include <cstdint>
#include <vector>

#include "mm2im/quant.hpp"
#include "mm2im/shape.hpp"
#include "mm2im/tensor.hpp"

// Reference implementations of quantized TCONV. All three produce identical
// int8 outputs; direct_tconv is the ground truth the rest of the library is
// checked against.

namespace mm2im {

namespace detail {

inline void check_operands(const TConvShape& sh, const QuantParams& q, const Int8Tensor& input,
                           const Int8Tensor& filters) {
  check_input(sh, input);
  check_filters(sh, filters);
  check_quant(sh, q);
}

inline std::vector<std::int32_t> centered_input(const Int8Tensor& input, std::int32_t zero) {
  std::vector<std::int32_t> out(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = std::int32_t{input[i]} - zero;
  return out;
}

// Crops the padded-grid accumulators, adds bias and requantizes.
inline Int8Tensor finish_from_padded(const TConvShape& sh, const QuantParams& q,
                                     const AccTensor& padded) {
  Int8Tensor out = make_output(sh);
  for (int oh = 0; oh < sh.o_h; ++oh) {
    const int ph = oh + sh.pad_top;
    for (int ow = 0; ow < sh.o_w; ++ow) {
      const int pw = ow + sh.pad_left;
      const bool inside = ph < sh.p_h && pw < sh.p_w;
      for (int oc = 0; oc < sh.o_c; ++oc) {
        const std::int32_t acc = q.bias[oc] + (inside ? padded.at(ph, pw, oc) : 0);
        out.at(oh, ow, oc) = requantize(acc, q);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Scatter-accumulates every input pixel through every kernel tap into the
/// (p_h, p_w, o_c) padded grid. No bias, no cropping.
inline AccTensor scatter_accumulate_padded(const TConvShape& sh, const QuantParams& q,
                                           const Int8Tensor& input, const Int8Tensor& filters) {
  detail::check_operands(sh, q, input, filters);
  const auto x = detail::centered_input(input, q.input_zero);
  AccTensor padded({std::size_t(sh.p_h), std::size_t(sh.p_w), std::size_t(sh.o_c)}, 0);
  const std::size_t ic_n = std::size_t(sh.i_c);
  for (int ih = 0; ih < sh.i_h; ++ih) {
    for (int iw = 0; iw < sh.i_w; ++iw) {
      const std::int32_t* px = &x[input.offset(ih, iw, 0)];
      for (int kh = 0; kh < sh.ks; ++kh) {
        for (int kw = 0; kw < sh.ks; ++kw) {
          for (int oc = 0; oc < sh.o_c; ++oc) {
            const std::int8_t* pw = &filters.data()[filters.offset(kh, kw, oc, 0)];
            std::int32_t dot = 0;
            for (std::size_t ic = 0; ic < ic_n; ++ic) dot += px[ic] * std::int32_t{pw[ic]};
            padded.at(ih * sh.s + kh, iw * sh.s + kw, oc) += dot;
          }
        }
      }
    }
  }
  return padded;
}

/// Ground-truth TCONV: scatter-accumulate, crop, add bias, requantize.
inline Int8Tensor direct_tconv(const TConvShape& sh, const QuantParams& q,
                               const Int8Tensor& input, const Int8Tensor& filters) {
  return detail::finish_from_padded(sh, q, scatter_accumulate_padded(sh, q, input, filters));
}

/// Fraction of the zero-inserted, edge-padded input grid that holds
/// inserted zeros rather than input pixels (per channel).
inline double zero_insertion_overhead(const TConvShape& sh) {
  const double rows = sh.o_h + sh.ks - 1;
  const double cols = sh.o_w + sh.ks - 1;
  return 1.0 - double(sh.i_h) * sh.i_w / (rows * cols);
}

/// TCONV as an ordinary stride-1 convolution: s - 1 zeros are inserted
/// between input pixels, the result is edge padded so that a valid
/// convolution with the spatially flipped kernel yields the cropped output
/// directly. Leading padding is ks - 1 - pad_top.
inline Int8Tensor zero_insertion_tconv(const TConvShape& sh, const QuantParams& q,
                                       const Int8Tensor& input, const Int8Tensor& filters) {
  detail::check_operands(sh, q, input, filters);
  const int z_h = sh.o_h + sh.ks - 1;
  const int z_w = sh.o_w + sh.ks - 1;
  const int lead_h = sh.ks - 1 - sh.pad_top;
  const int lead_w = sh.ks - 1 - sh.pad_left;
  const std::size_t ic_n = std::size_t(sh.i_c);

  // Centered values; inserted and padded positions are exact zeros.
  AccTensor z({std::size_t(z_h), std::size_t(z_w), ic_n}, 0);
  for (int ih = 0; ih < sh.i_h; ++ih) {
    const int zh = ih * sh.s + lead_h;
    if (zh < 0 || zh >= z_h) continue;
    for (int iw = 0; iw < sh.i_w; ++iw) {
      const int zw = iw * sh.s + lead_w;
      if (zw < 0 || zw >= z_w) continue;
      for (std::size_t ic = 0; ic < ic_n; ++ic) {
        z.at(zh, zw, ic) = std::int32_t{input.at(ih, iw, ic)} - q.input_zero;
      }
    }
  }

  Int8Tensor out = make_output(sh);
  std::vector<std::int32_t> acc(std::size_t(sh.o_c));
  for (int oh = 0; oh < sh.o_h; ++oh) {
    for (int ow = 0; ow < sh.o_w; ++ow) {
      for (int oc = 0; oc < sh.o_c; ++oc) acc[oc] = q.bias[oc];
      for (int th = 0; th < sh.ks; ++th) {
        for (int tw = 0; tw < sh.ks; ++tw) {
          const std::int32_t* pz = &z.data()[z.offset(oh + th, ow + tw, 0)];
          const int kh = sh.ks - 1 - th;
          const int kw = sh.ks - 1 - tw;
          for (int oc = 0; oc < sh.o_c; ++oc) {
            const std::int8_t* pw = &filters.data()[filters.offset(kh, kw, oc, 0)];
            std::int32_t dot = 0;
            for (std::size_t ic = 0; ic < ic_n; ++ic) dot += pz[ic] * std::int32_t{pw[ic]};
            acc[oc] += dot;
          }
        }
      }
      for (int oc = 0; oc < sh.o_c; ++oc) out.at(oh, ow, oc) = requantize(acc[oc], q);
    }
  }
  return out;
}

struct IomResult {
  Int8Tensor output;
  std::int64_t macs = 0;             // M * N * K
  std::int64_t partial_outputs = 0;  // M * N, all written to the partial buffer
};

/// Unoptimized input-oriented mapping: the full M x N partial-output matrix
/// mm(I, W^T) is materialized, then col2im scatters each column onto the
/// padded grid before cropping. Column n of the MatMul is kernel tap
/// n / o_c, output channel n % o_c.
inline IomResult iom_baseline_tconv(const TConvShape& sh, const QuantParams& q,
                                    const Int8Tensor& input, const Int8Tensor& filters) {
  detail::check_operands(sh, q, input, filters);
  const auto x = detail::centered_input(input, q.input_zero);
  const std::int64_t M = sh.m();
  const std::int64_t N = sh.n();
  const std::size_t K = std::size_t(sh.k());

  IomResult res;
  std::vector<std::int32_t> partial(std::size_t(M * N));
  for (std::int64_t r = 0; r < M; ++r) {
    const std::int32_t* row = &x[std::size_t(r) * K];
    for (std::int64_t n = 0; n < N; ++n) {
      // Filter layout (ks, ks, o_c, i_c) flattens to exactly column n.
      const std::int8_t* col = &filters.data()[std::size_t(n) * K];
      std::int32_t dot = 0;
      for (std::size_t kk = 0; kk < K; ++kk) dot += row[kk] * std::int32_t{col[kk]};
      partial[std::size_t(r * N + n)] = dot;
      res.macs += std::int64_t(K);
    }
  }
  res.partial_outputs = M * N;

  // col2im
  AccTensor padded({std::size_t(sh.p_h), std::size_t(sh.p_w), std::size_t(sh.o_c)}, 0);
  for (std::int64_t r = 0; r < M; ++r) {
    const int ih = int(r / sh.i_w);
    const int iw = int(r % sh.i_w);
    for (std::int64_t n = 0; n < N; ++n) {
      const int tap = int(n / sh.o_c);
      const int oc = int(n % sh.o_c);
      padded.at(ih * sh.s + tap / sh.ks, iw * sh.s + tap % sh.ks, oc) +=
          partial[std::size_t(r * N + n)];
    }
  }
  res.output = detail::finish_from_padded(sh, q, padded);
  return res;
}

}  // namespace mm2im
