#pragma once

#include <algorithm>
#include <cstdint>
#include <ostream>
#include <string>

#include "mm2im/error.hpp"

namespace mm2im {

/// Parameters of one transposed-convolution layer, tconv(i_h, i_w, i_c, ks,
/// o_c, s), together with the dimensions derived from them.
///
/// The layer scatters every input pixel through a ks x ks kernel onto a
/// padded grid of p_h x p_w positions with stride s, then crops pad_top /
/// pad_left rows and columns from the leading edge (and pad_bottom /
/// pad_right from the trailing edge) to obtain the o_h x o_w output, where
/// o_h = s * i_h.
struct TConvShape {
  int i_h = 0;
  int i_w = 0;
  int i_c = 0;
  int ks = 0;
  int o_c = 0;
  int s = 0;

  int o_h = 0;
  int o_w = 0;
  int p_h = 0;
  int p_w = 0;
  int pad_top = 0;
  int pad_left = 0;
  int pad_bottom = 0;
  int pad_right = 0;

  // True when the stride is larger than the kernel. Such layers leave output
  // positions that no input reaches and have no cropped perimeter.
  bool stride_exceeds_kernel() const noexcept { return s > ks; }

  // MatMul view of the layer.
  std::int64_t m() const noexcept { return std::int64_t{i_h} * i_w; }
  std::int64_t n() const noexcept { return std::int64_t{ks} * ks * o_c; }
  std::int64_t k() const noexcept { return i_c; }

  std::int64_t input_elems() const noexcept { return m() * i_c; }
  std::int64_t filter_elems() const noexcept { return std::int64_t{ks} * ks * o_c * i_c; }
  std::int64_t output_elems() const noexcept { return std::int64_t{o_h} * o_w * o_c; }

  friend bool operator==(const TConvShape&, const TConvShape&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const TConvShape& sh) {
  return os << "tconv(" << sh.i_h << "," << sh.i_w << "," << sh.i_c << "," << sh.ks << ","
            << sh.o_c << "," << sh.s << ")";
}

inline std::string to_string(const TConvShape& sh) {
  return "tconv(" + std::to_string(sh.i_h) + "," + std::to_string(sh.i_w) + "," +
         std::to_string(sh.i_c) + "," + std::to_string(sh.ks) + "," + std::to_string(sh.o_c) +
         "," + std::to_string(sh.s) + ")";
}

/// Fills in the derived dimensions of tconv(i_h, i_w, i_c, ks, o_c, s).
///
/// The ks - s cropped rows are split as pad_top = floor((ks - s) / 2) with
/// the remainder at the bottom; columns likewise. When s > ks nothing is
/// cropped. Throws shape_error if any parameter is below 1.
inline TConvShape derive_shape(int i_h, int i_w, int i_c, int ks, int o_c, int s) {
  if (i_h < 1 || i_w < 1 || i_c < 1 || ks < 1 || o_c < 1 || s < 1) {
    throw shape_error("tconv parameters must all be >= 1, got (" + std::to_string(i_h) + "," +
                      std::to_string(i_w) + "," + std::to_string(i_c) + "," +
                      std::to_string(ks) + "," + std::to_string(o_c) + "," +
                      std::to_string(s) + ")");
  }
  TConvShape sh;
  sh.i_h = i_h;
  sh.i_w = i_w;
  sh.i_c = i_c;
  sh.ks = ks;
  sh.o_c = o_c;
  sh.s = s;
  sh.o_h = s * i_h;
  sh.o_w = s * i_w;
  sh.p_h = (i_h - 1) * s + ks;
  sh.p_w = (i_w - 1) * s + ks;
  const int crop = std::max(0, ks - s);
  sh.pad_top = crop / 2;
  sh.pad_left = crop / 2;
  sh.pad_bottom = crop - sh.pad_top;
  sh.pad_right = crop - sh.pad_left;
  return sh;
}

}  // namespace mm2im
