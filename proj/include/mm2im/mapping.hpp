#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mm2im/error.hpp"
#include "mm2im/shape.hpp"

namespace mm2im {

/// One surviving partial output of a MatMul row: kernel tap `col`
/// (kh * ks + kw) lands on final-output pixel `im_dex` (oh * o_w + ow).
/// The same entry applies to every output channel.
struct MapEntry {
  int col = 0;
  int im_dex = 0;

  friend bool operator==(const MapEntry&, const MapEntry&) = default;
};

/// Compute map (cols) and output map (im_dex) of one MatMul row.
struct RowMaps {
  std::int64_t row_id = 0;
  std::vector<MapEntry> entries;

  friend bool operator==(const RowMaps&, const RowMaps&) = default;
};

/// Generates the maps for MatMul rows [row_id, row_id + num_rows).
///
/// MatMul row r holds input pixel (r / i_w, r % i_w), i.e. row_width = i_w
/// and the spatial row comes from the quotient. (The formulation that takes
/// the height offset from r % row_width only agrees with the row-major input
/// layout on square inputs; the output oracle arbitrates, see tests.)
inline std::vector<RowMaps> generate_row_maps(const TConvShape& sh, std::int64_t row_id,
                                              std::int64_t num_rows) {
  if (row_id < 0 || num_rows < 0 || row_id + num_rows > sh.m()) {
    throw range_error("map rows [" + std::to_string(row_id) + ", " +
                      std::to_string(row_id + num_rows) + ") outside [0, " +
                      std::to_string(sh.m()) + ")");
  }
  const std::int64_t row_width = sh.i_w;
  std::vector<RowMaps> maps;
  maps.reserve(std::size_t(num_rows));
  for (std::int64_t r = row_id; r < row_id + num_rows; ++r) {
    RowMaps rm;
    rm.row_id = r;
    const int h_pad = -sh.pad_top + sh.s * int(r / row_width);
    const int w_pad = -sh.pad_left + sh.s * int(r % row_width);
    int im_dex = h_pad * sh.o_w + w_pad;
    int col = 0;
    for (int ih = 0; ih < sh.ks; ++ih) {
      for (int iw = 0; iw < sh.ks; ++iw) {
        if (ih + h_pad >= 0 && ih + h_pad < sh.o_h && iw + w_pad >= 0 && iw + w_pad < sh.o_w) {
          rm.entries.push_back({col, im_dex});
        }
        ++col;
        ++im_dex;
      }
      im_dex += sh.o_w - sh.ks;
    }
    maps.push_back(std::move(rm));
  }
  return maps;
}

/// Efficiency figures of the IOM formulation of one layer.
struct MappingMetrics {
  std::int64_t m = 0;
  std::int64_t n = 0;
  std::int64_t k = 0;
  std::int64_t d_o = 0;          // cropped partial outputs
  double d_r = 0.0;              // d_o / (m * n)
  std::int64_t kept_entries = 0; // map entries over all rows (per output channel)
  std::int64_t padded_outs = 0;  // o_c * p_h * p_w
  std::int64_t final_outs = 0;   // o_c * o_h * o_w
  std::int64_t p_outs = 0;       // m * n
  double space_gain_no_skip = 0.0;  // p_outs / padded_outs
  double space_gain_full = 0.0;     // p_outs / final_outs
  std::int64_t effective_macs = 0;  // (m * n - d_o) * k
  bool stride_exceeds_kernel = false;
};

/// Drop counts by exact enumeration of every MatMul row's map.
inline MappingMetrics compute_metrics(const TConvShape& sh) {
  MappingMetrics mm;
  mm.m = sh.m();
  mm.n = sh.n();
  mm.k = sh.k();
  mm.p_outs = mm.m * mm.n;
  for (const auto& rm : generate_row_maps(sh, 0, sh.m())) {
    mm.kept_entries += std::int64_t(rm.entries.size());
  }
  mm.d_o = mm.p_outs - mm.kept_entries * sh.o_c;
  mm.d_r = double(mm.d_o) / double(mm.p_outs);
  mm.padded_outs = std::int64_t{sh.o_c} * sh.p_h * sh.p_w;
  mm.final_outs = sh.output_elems();
  mm.space_gain_no_skip = double(mm.p_outs) / double(mm.padded_outs);
  mm.space_gain_full = double(mm.p_outs) / double(mm.final_outs);
  mm.effective_macs = (mm.p_outs - mm.d_o) * mm.k;
  mm.stride_exceeds_kernel = sh.stride_exceeds_kernel();
  return mm;
}

/// i_end_row[h]: last input row needed to finish output row h.
struct RowSchedule {
  std::vector<int> i_end_row;
};

inline RowSchedule compute_i_end_row(const TConvShape& sh) {
  RowSchedule rs;
  rs.i_end_row.resize(std::size_t(sh.o_h));
  for (int h = 0; h < sh.o_h; ++h) {
    rs.i_end_row[std::size_t(h)] = std::min(sh.i_h - 1, (h + sh.pad_top) / sh.s);
  }
  return rs;
}

/// Output row a map entry accumulates into.
inline int target_out_row(const TConvShape& sh, const MapEntry& e) { return e.im_dex / sh.o_w; }

}  // namespace mm2im
