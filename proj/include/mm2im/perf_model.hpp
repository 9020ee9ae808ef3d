#pragma once

#include <cstdint>
#include <string_view>

#include "mm2im/config.hpp"
#include "mm2im/driver.hpp"
#include "mm2im/error.hpp"
#include "mm2im/mapping.hpp"
#include "mm2im/shape.hpp"

// Analytical latency model of one layer on the accelerator:
//   t_pm    = t_cu_compute + t_cu_load + t_cu_store + t_au
//   t_data  = (w_size + i_size + o_size + omap_size) * bw
//   t_total = t_pm + t_data
// Stage terms use the unit costs in SimConfig::costs and ignore overlap
// between stages, so the cycle-level simulator lands close to, but not on,
// these figures.

namespace mm2im {

struct PlatformParams {
  double bw = 1.25e-9;  // seconds per byte on the host stream
  double freq = 200e6;  // accelerator clock, Hz
  int x = 8;
  int uf = 16;

  /// Mirrors x/uf and derives bw from the simulator's stream width.
  static PlatformParams matching(const SimConfig& cfg, double freq = 200e6) {
    PlatformParams p;
    p.freq = freq;
    p.bw = 1.0 / (double(cfg.stream_bytes_per_cycle) * freq);
    p.x = cfg.x;
    p.uf = cfg.uf;
    return p;
  }
};

enum class MapVariant { host_omap, on_chip_mapper };

inline std::string_view to_string(MapVariant v) {
  return v == MapVariant::host_omap ? "host_omap" : "on_chip_mapper";
}

struct PerfEstimate {
  double t_cu_compute = 0;
  double t_cu_load = 0;
  double t_cu_store = 0;
  double t_au = 0;
  double t_pm = 0;
  double t_data = 0;
  double t_total = 0;
  std::int64_t w_size = 0;
  std::int64_t i_size = 0;
  std::int64_t o_size = 0;
  std::int64_t omap_size = 0;
  double omap_time = 0;  // omap_size * bw

  double omap_share() const { return t_total > 0 ? omap_time / t_total : 0.0; }
  double cycles(double freq) const { return t_total * freq; }
};

inline PerfEstimate estimate(const TConvShape& sh, const SimConfig& cfg,
                             const PlatformParams& plat, MapVariant variant) {
  cfg.validate();
  if (!(plat.bw > 0) || !(plat.freq > 0)) throw config_error("bw and freq must be positive");
  if (plat.x != cfg.x || plat.uf != cfg.uf) {
    throw config_error("platform x/uf do not mirror the simulator config");
  }
  const auto mm = compute_metrics(sh);
  const auto xfer = transfer_sizes(sh, cfg.x);
  const auto& k = cfg.costs;
  const std::int64_t tiles = xfer.tiles;
  const std::int64_t taps_ic = std::int64_t{sh.ks} * sh.ks * sh.i_c;
  const std::int64_t row_elems = std::int64_t{sh.i_w} * sh.i_c;

  // effective_macs / (x * uf), corrected for idle PMs in a partial last tile
  // and for i_c not being a multiple of uf.
  const double compute = double(tiles * mm.kept_entries * ceil_div(sh.i_c, cfg.uf));

  double load = 0;
  double store = 0;
  for (std::int64_t t = 0; t < tiles; ++t) {
    const std::int64_t active = std::min<std::int64_t>(cfg.x, sh.o_c - t * cfg.x);
    load += double(active * ceil_div(taps_ic, cfg.uf) + sh.i_h * ceil_div(row_elems, cfg.uf)) *
            k.buffer_beat;
    store += double(std::int64_t{sh.o_h} * ceil_div(active * sh.o_w, 4)) * k.crossbar_word;
  }
  // Accumulation hides behind the CU; what remains exposed per output row is
  // the last accumulate plus post-processing of the row.
  const double au = double(tiles * sh.o_h) * double(std::int64_t{sh.o_w} * k.ppu_element +
                                                    k.au_accumulate);

  PerfEstimate e;
  e.t_cu_compute = compute / plat.freq;
  e.t_cu_load = load / plat.freq;
  e.t_cu_store = store / plat.freq;
  e.t_au = au / plat.freq;
  e.t_pm = e.t_cu_compute + e.t_cu_load + e.t_cu_store + e.t_au;

  e.w_size = xfer.w_size();
  e.i_size = xfer.input_bytes;
  e.o_size = xfer.output_bytes;
  e.omap_size = variant == MapVariant::host_omap
                    ? tiles * mm.kept_entries * cfg.omap_entry_bytes
                    : 0;
  e.t_data = double(e.w_size + e.i_size + e.o_size + e.omap_size) * plat.bw;
  e.omap_time = double(e.omap_size) * plat.bw;
  e.t_total = e.t_pm + e.t_data;
  return e;
}

}  // namespace mm2im
