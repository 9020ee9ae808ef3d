#pragma once

#include <cstdint>
#include <string>

#include "mm2im/error.hpp"

namespace mm2im {

/// Unit costs, in cycles, of the accelerator stages. The simulator and the
/// analytical model both read this table.
struct StageCosts {
  int map_entry = 1;      // mapper, per emitted (cmap, omap) pair
  int au_accumulate = 1;  // out muxer, per partial accumulated into out_buf
  int ppu_element = 1;    // post-processing, per output element
  int crossbar_word = 1;  // output crossbar, per 32-bit output word
  int buffer_beat = 1;    // PM-local buffer write of uf elements
};

/// Accelerator instance parameters.
struct SimConfig {
  int x = 8;    // processing modules (= filter_step)
  int uf = 16;  // MACs per compute unit per cycle

  // Capacities in elements.
  std::int64_t filter_buf_elems = 32768;  // per PM
  std::int64_t row_buf_elems = 65536;     // shared row buffer
  std::int64_t out_buf_elems = 1024;      // accumulators per PM

  StageCosts costs;

  int stream_bytes_per_cycle = 4;  // host <-> accelerator stream width

  // Accumulate partials of output row h + 1 while row h is computed.
  bool lookahead = true;

  // Charge host-side map transfers instead of generating maps on chip.
  bool charge_omap = false;
  int omap_entry_bytes = 8;  // one word of cmap, one word of omap

  void validate() const {
    if (x < 1) throw config_error("x must be >= 1");
    if (uf < 1) throw config_error("uf must be >= 1");
    if (filter_buf_elems < 1 || row_buf_elems < 1 || out_buf_elems < 1) {
      throw config_error("buffer capacities must be positive");
    }
    if (stream_bytes_per_cycle < 1) throw config_error("stream width must be >= 1 byte/cycle");
    if (omap_entry_bytes < 1) throw config_error("omap entry width must be >= 1 byte");
    const StageCosts& c = costs;
    if (c.map_entry < 0 || c.au_accumulate < 0 || c.ppu_element < 0 || c.crossbar_word < 0 ||
        c.buffer_beat < 0) {
      throw config_error("stage costs must be non-negative");
    }
  }
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace mm2im
