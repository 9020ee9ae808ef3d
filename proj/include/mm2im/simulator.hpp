#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mm2im/config.hpp"
#include "mm2im/error.hpp"
#include "mm2im/isa.hpp"
#include "mm2im/mapping.hpp"
#include "mm2im/quant.hpp"
#include "mm2im/shape.hpp"

// Functional and cycle-approximate model of the MM2IM accelerator:
// instruction decoder, scheduler, weight loader, dynamic input loader with
// row buffer, on-chip mapper, X processing modules (compute unit,
// accumulation unit, post-processing unit) and the output crossbar.
//
// Timing. Messages execute back to back. Each message first pays its stream
// transfer, ceil(data bytes / stream_bytes_per_cycle) cycles. Then:
//   LoadWeights  active * ceil(ks*ks*i_c / uf) buffer beats (PMs in turn)
//   LoadInput    rows * ceil(i_w*i_c / uf) buffer beats (broadcast)
//   Schedule     max(mapper, cu, au) + au drain + o_w * ppu
//   StoreOutput  ceil(active * o_w / 4) crossbar words
// where, within one Schedule step, mapper counts the map entries of the
// input rows that arrived since the previous step, cu = ceil(i_c/uf) per
// computed entry and au = one accumulate per computed entry. The three are
// connected by FIFOs and overlap; the PPU waits for the whole row.

namespace mm2im {

struct OutputPacket {
  int h = 0;
  int c_base = 0;
  int channels = 0;
  std::vector<std::uint32_t> words;  // (ow, channel) order, int8 packed

  friend bool operator==(const OutputPacket&, const OutputPacket&) = default;
};

struct StageCycles {
  std::int64_t cu_compute = 0;
  std::int64_t cu_load = 0;
  std::int64_t cu_store = 0;
  std::int64_t au = 0;
  std::int64_t ppu = 0;
  std::int64_t mapper = 0;
  std::int64_t stall = 0;     // pipeline cycles the CU waited on mapper/AU
  std::int64_t transfer = 0;  // host stream
  std::int64_t total = 0;

  friend bool operator==(const StageCycles&, const StageCycles&) = default;
};

struct ByteCounters {
  std::int64_t weights_in = 0;
  std::int64_t bias_in = 0;
  std::int64_t inputs_in = 0;
  std::int64_t outputs_out = 0;
  std::int64_t omap_in = 0;

  std::int64_t total() const { return weights_in + bias_in + inputs_in + outputs_out + omap_in; }
  friend bool operator==(const ByteCounters&, const ByteCounters&) = default;
};

struct SimReport {
  std::vector<OutputPacket> outputs;
  std::int64_t macs_executed = 0;
  std::int64_t macs_skipped = 0;
  std::int64_t map_entries = 0;  // emitted by the mapper
  StageCycles cycles;
  ByteCounters bytes;
  std::int64_t out_buf_high_water = 0;  // accumulators, per PM
  std::int64_t row_buf_high_water = 0;  // elements
  std::int64_t fifo_depth_max = 0;      // CU -> AU, not bounded
  std::int64_t messages = 0;
  std::vector<std::int64_t> pm_busy_cycles;

  double pm_utilization(std::size_t pm) const {
    return cycles.total ? double(pm_busy_cycles.at(pm)) / double(cycles.total) : 0.0;
  }

  friend bool operator==(const SimReport&, const SimReport&) = default;
};

/// Per input row: the Schedule step where it is first used and the last
/// step that still reads it.
struct RowResidency {
  std::vector<int> arrival;
  std::vector<int> last_use;

  int peak_rows() const {
    int peak = 0;
    if (arrival.empty()) return 0;
    const int steps = *std::max_element(last_use.begin(), last_use.end()) + 1;
    for (int h = 0; h < steps; ++h) {
      int live = 0;
      for (std::size_t r = 0; r < arrival.size(); ++r) {
        live += arrival[r] <= h && h <= last_use[r];
      }
      peak = std::max(peak, live);
    }
    return peak;
  }
};

// Step at which an entry targeting output row t, from an input row that
// arrived at step `arrival`, is computed.
inline int compute_step(int target, int arrival, bool lookahead) {
  return lookahead ? std::max(arrival, target - 1) : target;
}

inline RowResidency row_residency(const TConvShape& sh, bool lookahead) {
  const auto sched = compute_i_end_row(sh);
  RowResidency res;
  res.arrival.assign(std::size_t(sh.i_h), -1);
  res.last_use.assign(std::size_t(sh.i_h), -1);
  int loaded = 0;
  for (int h = 0; h < sh.o_h; ++h) {
    for (; loaded <= sched.i_end_row[std::size_t(h)]; ++loaded) res.arrival[loaded] = h;
  }
  for (int r = 0; r < sh.i_h; ++r) {
    // Every MatMul row of an input row targets the same output rows.
    const auto maps = generate_row_maps(sh, std::int64_t(r) * sh.i_w, 1);
    int last = res.arrival[r];
    for (const auto& e : maps[0].entries) {
      last = std::max(last, compute_step(target_out_row(sh, e), res.arrival[r], lookahead));
    }
    res.last_use[r] = last;
  }
  return res;
}

class Simulator {
 public:
  explicit Simulator(SimConfig cfg = {}) : cfg_(cfg) {
    cfg_.validate();
    reset();
  }

  const SimConfig& config() const noexcept { return cfg_; }

  /// Trace sink: one line per message, "<start cycle> <opcode> <mnemonic>
  /// <payload words>". Pass nullptr to disable.
  void set_trace(std::ostream* os) { trace_ = os; }

  /// Clears layer state and all counters.
  void reset() {
    layer_ = Layer{};
    report_ = SimReport{};
    report_.pm_busy_cycles.assign(std::size_t(cfg_.x), 0);
    msg_index_ = 0;
  }

  /// No tile pass is in flight.
  bool idle() const noexcept {
    return !layer_.configured || (layer_.next_h == layer_.shape.o_h && layer_.pending_store < 0);
  }

  /// Decodes and executes every message in `words`.
  void ingest(std::span<const std::uint32_t> words) {
    while (!words.empty()) {
      isa::Decoded d = [&] {
        try {
          return isa::decode(words);
        } catch (const decode_error& e) {
          throw sim_fault(msg_index_, std::string("decode: ") + e.what());
        }
      }();
      const std::size_t payload = words.size() - d.rest.size() - 1;
      execute(d.instruction, payload);
      words = d.rest;
    }
  }

  void execute(const isa::Instruction& ins) {
    execute(ins, trace_ ? isa::encode(ins).size() - 1 : 0);
  }

  /// Computes every partial that has to be ready for output row h and
  /// post-processes the row.
  void schedule_out_row(int h, int c_base) {
    begin_message(isa::Opcode::Schedule, 0);
    do_schedule(h, c_base);
    end_message();
  }

  /// Sends row h of the tile through the crossbar; returns the payload.
  std::vector<std::uint32_t> store_out_row(int h, int c_base) {
    begin_message(isa::Opcode::StoreOutput, 0);
    do_store(h, c_base);
    end_message();
    return report_.outputs.back().words;
  }

  const SimReport& report() const noexcept { return report_; }

  std::vector<OutputPacket> take_outputs() { return std::exchange(report_.outputs, {}); }

 private:
  struct PM {
    bool enabled = false;
    std::vector<std::int8_t> filter;  // ks*ks taps of i_c weights
    std::int32_t bias = 0;
    std::vector<std::int32_t> cur;   // accumulators for the row being computed
    std::vector<std::int32_t> next;  // lookahead row
    std::vector<std::int8_t> result;
  };

  struct ResidentRow {
    int row = 0;
    int arrival = -1;  // -1 until mapped
    int last_use = 0;
    std::vector<std::int8_t> data;
    std::vector<RowMaps> maps;
  };

  struct Layer {
    bool configured = false;
    bool weights_loaded = false;
    TConvShape shape;
    isa::Configure regs;
    RowSchedule sched;
    std::vector<PM> pms;
    std::vector<ResidentRow> rows;
    std::vector<std::uint8_t> next_touched;
    int rows_loaded = 0;
    int next_h = 0;
    int pending_store = -1;
    std::int64_t row_buf_rows_cap = 0;
  };

  void fault(const std::string& what) const { throw sim_fault(msg_index_, what); }

  void begin_message(isa::Opcode op, std::size_t payload_words) {
    if (trace_) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%lld 0x%02x %s %zu\n",
                    static_cast<long long>(report_.cycles.total), unsigned(op),
                    std::string(isa::mnemonic(op)).c_str(), payload_words);
      *trace_ << buf;
    }
  }

  void end_message() {
    ++msg_index_;
    ++report_.messages;
  }

  void execute(const isa::Instruction& ins, std::size_t payload_words) {
    begin_message(isa::opcode_of(ins), payload_words);
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, isa::Configure>) do_configure(m);
          else if constexpr (std::is_same_v<T, isa::LoadWeights>) do_load_weights(m);
          else if constexpr (std::is_same_v<T, isa::LoadInput>) do_load_input(m);
          else if constexpr (std::is_same_v<T, isa::Schedule>) do_schedule(m.h, m.c_base);
          else do_store(m.h, m.c_base);
        },
        ins);
    end_message();
  }

  void charge_transfer(std::int64_t bytes) {
    const std::int64_t c = ceil_div(bytes, cfg_.stream_bytes_per_cycle);
    report_.cycles.transfer += c;
    report_.cycles.total += c;
  }

  void do_configure(const isa::Configure& c) {
    TConvShape sh;
    try {
      sh = isa::shape_of(c);
    } catch (const shape_error& e) {
      fault(std::string("configure: ") + e.what());
    }
    if (c.x != cfg_.x || c.uf != cfg_.uf) {
      fault("configure: stream built for x=" + std::to_string(c.x) + " uf=" +
            std::to_string(c.uf) + ", accelerator has x=" + std::to_string(cfg_.x) +
            " uf=" + std::to_string(cfg_.uf));
    }
    if (c.active_pms < 1 || c.active_pms > cfg_.x) fault("configure: active_pms out of range");
    if (c.c_base < 0 || c.c_base + c.active_pms > sh.o_c) fault("configure: tile outside o_c");
    if (c.row_width != sh.i_w || c.row_id != 0) fault("configure: bad mapper seeds");
    if (c.input_zero < -128 || c.input_zero > 127 || c.output_zero < -128 ||
        c.output_zero > 127) {
      fault("configure: zero point outside int8");
    }
    if (c.requant_multiplier < 0 || c.requant_shift < kMinRequantShift ||
        c.requant_shift > kMaxRequantShift) {
      fault("configure: requantization registers out of range");
    }

    const std::int64_t filter_elems = std::int64_t{sh.ks} * sh.ks * sh.i_c;
    if (filter_elems > cfg_.filter_buf_elems) {
      fault("configure: filter block of " + std::to_string(filter_elems) +
            " elements exceeds filter buffer");
    }
    const std::int64_t acc_need = std::int64_t{cfg_.lookahead ? 2 : 1} * sh.o_w;
    if (acc_need > cfg_.out_buf_elems) {
      fault("configure: out_buf needs " + std::to_string(acc_need) + " accumulators");
    }
    const std::int64_t row_elems = std::int64_t{sh.i_w} * sh.i_c;
    const std::int64_t rows_need = row_residency(sh, cfg_.lookahead).peak_rows();
    if (rows_need * row_elems > cfg_.row_buf_elems) {
      fault("configure: row buffer needs " + std::to_string(rows_need * row_elems) +
            " elements");
    }

    layer_ = Layer{};
    layer_.configured = true;
    layer_.shape = sh;
    layer_.regs = c;
    layer_.sched = compute_i_end_row(sh);
    layer_.row_buf_rows_cap = cfg_.row_buf_elems / row_elems;
    layer_.pms.resize(std::size_t(cfg_.x));
    for (int p = 0; p < cfg_.x; ++p) {
      PM& pm = layer_.pms[std::size_t(p)];
      pm.enabled = p < c.active_pms;
      if (!pm.enabled) continue;
      pm.cur.assign(std::size_t(sh.o_w), 0);
      pm.next.assign(std::size_t(sh.o_w), 0);
      pm.result.assign(std::size_t(sh.o_w), 0);
    }
    layer_.next_touched.assign(std::size_t(sh.o_w), 0);
    report_.cycles.total += 1;  // register write
  }

  void need_configured(const char* what) const {
    if (!layer_.configured) fault(std::string(what) + " before CONFIGURE");
  }

  void do_load_weights(const isa::LoadWeights& lw) {
    need_configured("LOAD_WEIGHTS");
    const auto& sh = layer_.shape;
    if (layer_.weights_loaded) fault("LOAD_WEIGHTS: filters already loaded for this tile");
    if (lw.num_filters() != std::size_t(cfg_.x)) {
      fault("LOAD_WEIGHTS: expected " + std::to_string(cfg_.x) + " filter blocks");
    }
    const std::int64_t fe = std::int64_t{sh.ks} * sh.ks * sh.i_c;
    if (lw.filter_elems != fe) fault("LOAD_WEIGHTS: filter block size mismatch");

    const std::int64_t n = std::int64_t(lw.num_filters());
    report_.bytes.weights_in += n * fe;
    report_.bytes.bias_in += n * 4;
    charge_transfer(n * fe + n * 4);

    std::int64_t beats = 0;
    for (std::size_t p = 0; p < layer_.pms.size(); ++p) {
      PM& pm = layer_.pms[p];
      if (!pm.enabled) continue;
      const auto first = lw.data.begin() + std::ptrdiff_t(p * std::size_t(fe));
      pm.filter.assign(first, first + std::ptrdiff_t(fe));
      pm.bias = lw.bias[p];
      beats += ceil_div(fe, cfg_.uf);
    }
    const std::int64_t c = beats * cfg_.costs.buffer_beat;
    report_.cycles.cu_load += c;
    report_.cycles.total += c;
    layer_.weights_loaded = true;
  }

  void do_load_input(const isa::LoadInput& li) {
    need_configured("LOAD_INPUT");
    if (!layer_.weights_loaded) fault("LOAD_INPUT before LOAD_WEIGHTS");
    const auto& sh = layer_.shape;
    const std::int64_t row_elems = std::int64_t{sh.i_w} * sh.i_c;
    if (li.row_elems != row_elems) fault("LOAD_INPUT: row size mismatch");
    const int n = int(li.num_rows());
    if (li.first_row != layer_.rows_loaded) {
      fault("LOAD_INPUT: expected row " + std::to_string(layer_.rows_loaded) + ", got " +
            std::to_string(li.first_row));
    }
    if (n < 1 || li.first_row + n > sh.i_h) fault("LOAD_INPUT: row range outside input");
    if (std::int64_t(layer_.rows.size()) + n > layer_.row_buf_rows_cap) {
      fault("LOAD_INPUT: row buffer overflow");
    }

    report_.bytes.inputs_in += n * row_elems;
    std::int64_t bytes = n * row_elems;
    for (int i = 0; i < n; ++i) {
      ResidentRow rr;
      rr.row = li.first_row + i;
      const auto first = li.data.begin() + std::ptrdiff_t(i * row_elems);
      rr.data.assign(first, first + std::ptrdiff_t(row_elems));
      if (cfg_.charge_omap) {
        std::int64_t entries = 0;
        for (const auto& rm : generate_row_maps(sh, std::int64_t(rr.row) * sh.i_w, sh.i_w)) {
          entries += std::int64_t(rm.entries.size());
        }
        report_.bytes.omap_in += entries * cfg_.omap_entry_bytes;
        bytes += entries * cfg_.omap_entry_bytes;
      }
      layer_.rows.push_back(std::move(rr));
    }
    layer_.rows_loaded += n;
    charge_transfer(bytes);
    report_.row_buf_high_water =
        std::max(report_.row_buf_high_water, std::int64_t(layer_.rows.size()) * row_elems);

    const std::int64_t c = n * ceil_div(row_elems, cfg_.uf) * cfg_.costs.buffer_beat;
    report_.cycles.cu_load += c;
    report_.cycles.total += c;
  }

  void do_schedule(int h, int c_base) {
    need_configured("SCHEDULE");
    const auto& sh = layer_.shape;
    if (!layer_.weights_loaded) fault("SCHEDULE before LOAD_WEIGHTS");
    if (c_base != layer_.regs.c_base) fault("SCHEDULE: channel tile does not match CONFIGURE");
    if (h != layer_.next_h || h >= sh.o_h) {
      fault("SCHEDULE: expected output row " + std::to_string(layer_.next_h) + ", got " +
            std::to_string(h));
    }
    if (layer_.pending_store >= 0) fault("SCHEDULE: previous row not stored");
    const int need_row = layer_.sched.i_end_row[std::size_t(h)];
    if (layer_.rows_loaded <= need_row) {
      fault("SCHEDULE: output row " + std::to_string(h) + " needs input row " +
            std::to_string(need_row));
    }

    const int active = layer_.regs.active_pms;
    const std::int64_t ic = sh.i_c;
    const std::int64_t taps = std::int64_t{sh.ks} * sh.ks;

    // Mapper: maps for input rows that arrived since the previous step.
    std::int64_t new_entries = 0;
    for (auto& rr : layer_.rows) {
      if (rr.arrival >= 0) continue;
      rr.arrival = h;
      rr.maps = generate_row_maps(sh, std::int64_t(rr.row) * sh.i_w, sh.i_w);
      rr.last_use = h;
      for (const auto& rm : rr.maps) {
        new_entries += std::int64_t(rm.entries.size());
        report_.macs_skipped += (taps - std::int64_t(rm.entries.size())) * ic * active;
        for (const auto& e : rm.entries) {
          rr.last_use = std::max(
              rr.last_use, compute_step(target_out_row(sh, e), rr.arrival, cfg_.lookahead));
        }
      }
    }
    report_.map_entries += new_entries;

    // Lookahead row becomes the current row.
    for (auto& pm : layer_.pms) {
      if (!pm.enabled) continue;
      std::swap(pm.cur, pm.next);
      std::fill(pm.next.begin(), pm.next.end(), 0);
    }
    std::fill(layer_.next_touched.begin(), layer_.next_touched.end(), 0);

    // CU + AU.
    std::int64_t computed = 0;
    for (const auto& rr : layer_.rows) {
      for (const auto& rm : rr.maps) {
        const auto iw = std::size_t(rm.row_id % sh.i_w);
        const std::int8_t* x = rr.data.data() + iw * std::size_t(ic);
        for (const auto& e : rm.entries) {
          const int t = target_out_row(sh, e);
          if (compute_step(t, rr.arrival, cfg_.lookahead) != h) continue;
          const auto ow = std::size_t(e.im_dex % sh.o_w);
          for (auto& pm : layer_.pms) {
            if (!pm.enabled) continue;
            const std::int8_t* w = pm.filter.data() + std::size_t(e.col) * std::size_t(ic);
            std::int32_t dot = 0;
            for (std::int64_t i = 0; i < ic; ++i) {
              dot += (std::int32_t{x[i]} - layer_.regs.input_zero) * std::int32_t{w[i]};
            }
            (t == h ? pm.cur : pm.next)[ow] += dot;
          }
          if (t != h) layer_.next_touched[ow] = 1;
          ++computed;
        }
      }
    }
    report_.macs_executed += computed * ic * active;

    std::int64_t touched = 0;
    for (auto f : layer_.next_touched) touched += f;
    report_.out_buf_high_water = std::max(report_.out_buf_high_water, sh.o_w + touched);

    // PPU.
    for (auto& pm : layer_.pms) {
      if (!pm.enabled) continue;
      for (std::size_t ow = 0; ow < std::size_t(sh.o_w); ++ow) {
        pm.result[ow] = requantize(pm.cur[ow] + pm.bias, layer_.regs.requant_multiplier,
                                   layer_.regs.requant_shift, layer_.regs.output_zero);
      }
    }

    // Timing.
    const auto& k = cfg_.costs;
    const std::int64_t mapper = new_entries * k.map_entry;
    const std::int64_t cu = computed * ceil_div(ic, cfg_.uf);
    const std::int64_t au = computed * k.au_accumulate;
    const std::int64_t pipe = std::max({mapper, cu, au}) + (computed ? k.au_accumulate : 0);
    const std::int64_t ppu = std::int64_t{sh.o_w} * k.ppu_element;
    auto& cyc = report_.cycles;
    cyc.mapper += mapper;
    cyc.cu_compute += cu;
    cyc.au += au;
    cyc.ppu += ppu;
    cyc.stall += pipe - cu;
    cyc.total += pipe + ppu;
    for (std::size_t p = 0; p < layer_.pms.size(); ++p) {
      if (layer_.pms[p].enabled) report_.pm_busy_cycles[p] += cu;
    }
    if (computed > 0) {
      const std::int64_t drained =
          k.au_accumulate > 0 ? std::min(computed, cu / k.au_accumulate) : computed;
      report_.fifo_depth_max =
          std::max(report_.fifo_depth_max, std::max<std::int64_t>(1, computed - drained));
    }

    // Release input rows nobody reads any more.
    std::erase_if(layer_.rows, [h](const ResidentRow& rr) {
      return rr.arrival >= 0 && rr.last_use <= h;
    });

    layer_.pending_store = h;
    layer_.next_h = h + 1;
  }

  void do_store(int h, int c_base) {
    need_configured("STORE_OUTPUT");
    const auto& sh = layer_.shape;
    if (c_base != layer_.regs.c_base) {
      fault("STORE_OUTPUT: channel tile does not match CONFIGURE");
    }
    if (h != layer_.pending_store) {
      fault("STORE_OUTPUT: output row " + std::to_string(h) + " is not complete");
    }
    const int active = layer_.regs.active_pms;
    std::vector<std::int8_t> bytes;
    bytes.reserve(std::size_t(active) * std::size_t(sh.o_w));
    for (int ow = 0; ow < sh.o_w; ++ow) {
      for (int p = 0; p < active; ++p) bytes.push_back(layer_.pms[std::size_t(p)].result[ow]);
    }
    OutputPacket pkt;
    pkt.h = h;
    pkt.c_base = c_base;
    pkt.channels = active;
    isa::pack_int8(bytes, pkt.words);

    const std::int64_t n = std::int64_t(bytes.size());
    report_.bytes.outputs_out += n;
    const std::int64_t c = std::int64_t(pkt.words.size()) * cfg_.costs.crossbar_word;
    report_.cycles.cu_store += c;
    report_.cycles.total += c;
    charge_transfer(n);
    report_.outputs.push_back(std::move(pkt));
    layer_.pending_store = -1;
    if (h == sh.o_h - 1) layer_.rows.clear();
  }

  SimConfig cfg_;
  Layer layer_;
  SimReport report_;
  std::size_t msg_index_ = 0;
  std::ostream* trace_ = nullptr;
};

}  // namespace mm2im
