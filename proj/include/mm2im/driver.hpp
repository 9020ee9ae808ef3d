#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mm2im/config.hpp"
#include "mm2im/error.hpp"
#include "mm2im/isa.hpp"
#include "mm2im/mapping.hpp"
#include "mm2im/quant.hpp"
#include "mm2im/shape.hpp"
#include "mm2im/simulator.hpp"
#include "mm2im/tensor.hpp"

// Host-side Tiled MM2IM driver. For every tile of filter_step = x output
// channels the filters are sent once (weight stationary); input rows are then
// streamed incrementally, each exactly once, and the tile's output rows are
// computed and stored one at a time (output stationary).

namespace mm2im {

/// Bytes moved over the host stream for one layer. Shared by the planner's
/// ledger and the performance model.
struct TransferSizes {
  int tiles = 0;
  std::int64_t weight_bytes = 0;  // X-padded filter blocks
  std::int64_t bias_bytes = 0;    // X-padded int32 biases
  std::int64_t input_bytes = 0;
  std::int64_t output_bytes = 0;

  std::int64_t w_size() const { return weight_bytes + bias_bytes; }
  friend bool operator==(const TransferSizes&, const TransferSizes&) = default;
};

inline int num_tiles(const TConvShape& sh, int x) { return int(ceil_div(sh.o_c, x)); }

inline TransferSizes transfer_sizes(const TConvShape& sh, int x) {
  TransferSizes t;
  t.tiles = num_tiles(sh, x);
  t.weight_bytes = std::int64_t{t.tiles} * x * sh.ks * sh.ks * sh.i_c;
  t.bias_bytes = std::int64_t{t.tiles} * x * 4;
  t.input_bytes = std::int64_t{t.tiles} * sh.input_elems();
  t.output_bytes = sh.output_elems();
  return t;
}

struct LedgerEntry {
  std::size_t message_index = 0;
  isa::Opcode opcode{};
  std::size_t word_offset = 0;
  std::size_t word_count = 0;
  int tile = 0;
  int first_row = -1;  // LoadInput only
  int rows = 0;        // LoadInput only
  int out_row = -1;    // Schedule / StoreOutput
  std::int64_t weight_bytes = 0;
  std::int64_t bias_bytes = 0;
  std::int64_t input_bytes = 0;
  std::int64_t output_bytes = 0;  // returned by StoreOutput
};

struct LayerPlan {
  TConvShape shape;
  QuantParams quant;
  SimConfig sim_config;
  int filter_step = 0;
  RowSchedule schedule;
  std::vector<std::uint32_t> stream;
  std::vector<LedgerEntry> ledger;

  TransferSizes totals() const {
    TransferSizes t;
    for (const auto& e : ledger) {
      t.tiles += e.opcode == isa::Opcode::Configure;
      t.weight_bytes += e.weight_bytes;
      t.bias_bytes += e.bias_bytes;
      t.input_bytes += e.input_bytes;
      t.output_bytes += e.output_bytes;
    }
    return t;
  }
};

/// Builds the instruction stream for one layer (Tiled MM2IM).
inline LayerPlan plan_layer(const TConvShape& sh, const QuantParams& quant,
                            const Int8Tensor& input, const Int8Tensor& filters,
                            const SimConfig& cfg) {
  cfg.validate();
  check_input(sh, input);
  check_filters(sh, filters);
  check_quant(sh, quant);

  LayerPlan plan;
  plan.shape = sh;
  plan.quant = quant;
  plan.sim_config = cfg;
  plan.filter_step = cfg.x;
  plan.schedule = compute_i_end_row(sh);

  auto emit = [&plan](const isa::Instruction& ins, LedgerEntry e) {
    e.message_index = plan.ledger.size();
    e.opcode = isa::opcode_of(ins);
    e.word_offset = plan.stream.size();
    isa::encode_into(ins, plan.stream);
    e.word_count = plan.stream.size() - e.word_offset;
    plan.ledger.push_back(e);
  };

  const std::size_t taps = std::size_t(sh.ks) * std::size_t(sh.ks);
  const std::size_t ic = std::size_t(sh.i_c);
  const std::size_t row_elems = std::size_t(sh.i_w) * ic;
  const int step = plan.filter_step;

  int tile = 0;
  for (int c = 0; c < sh.o_c; c += step, ++tile) {
    const int active = std::min(step, sh.o_c - c);

    isa::Configure conf = isa::make_configure(sh);
    conf.input_zero = quant.input_zero;
    conf.output_zero = quant.output_zero;
    conf.requant_multiplier = quant.requant_multiplier;
    conf.requant_shift = quant.requant_shift;
    conf.x = cfg.x;
    conf.uf = cfg.uf;
    conf.c_base = c;
    conf.active_pms = active;
    LedgerEntry le;
    le.tile = tile;
    emit(conf, le);

    // SendWeightFilters(c, filter_step); blocks past o_c are zero.
    isa::LoadWeights lw;
    lw.filter_elems = std::int32_t(taps * ic);
    lw.bias.assign(std::size_t(step), 0);
    lw.data.assign(std::size_t(step) * taps * ic, 0);
    for (int p = 0; p < active; ++p) {
      lw.bias[std::size_t(p)] = quant.bias[std::size_t(c + p)];
      for (std::size_t t = 0; t < taps; ++t) {
        const auto* src = &filters.data()[filters.offset(t / std::size_t(sh.ks),
                                                         t % std::size_t(sh.ks),
                                                         std::size_t(c + p), 0)];
        std::copy(src, src + ic, lw.data.begin() + std::ptrdiff_t((std::size_t(p) * taps + t) * ic));
      }
    }
    le = LedgerEntry{};
    le.tile = tile;
    le.weight_bytes = std::int64_t(lw.data.size());
    le.bias_bytes = std::int64_t(lw.bias.size()) * 4;
    emit(lw, le);

    int starting = 0;
    for (int h = 0; h < sh.o_h; ++h) {
      const int end = plan.schedule.i_end_row[std::size_t(h)];
      const int rows_to_send = end + 1 - starting;
      if (end != starting - 1) {
        isa::LoadInput li;
        li.first_row = starting;
        li.row_elems = std::int32_t(row_elems);
        const auto first = input.data().begin() + std::ptrdiff_t(std::size_t(starting) * row_elems);
        li.data.assign(first, first + std::ptrdiff_t(std::size_t(rows_to_send) * row_elems));
        le = LedgerEntry{};
        le.tile = tile;
        le.first_row = starting;
        le.rows = rows_to_send;
        le.input_bytes = std::int64_t(li.data.size());
        emit(li, le);
      }
      le = LedgerEntry{};
      le.tile = tile;
      le.out_row = h;
      emit(isa::Schedule{h, c}, le);
      le.output_bytes = std::int64_t{active} * sh.o_w;
      emit(isa::StoreOutput{h, c}, le);
      starting = end + 1;
    }
  }
  return plan;
}

struct LayerResult {
  Int8Tensor output;
  SimReport report;
};

/// Streams the plan through `sim` and reassembles the (o_h, o_w, o_c)
/// output. Simulator faults propagate as sim_fault with the message index.
inline LayerResult run_layer(const LayerPlan& plan, Simulator& sim) {
  if (!sim.idle()) throw error("run_layer: simulator is busy");
  sim.reset();
  sim.ingest(plan.stream);

  const auto& sh = plan.shape;
  LayerResult res;
  res.output = make_output(sh);
  const auto packets = sim.take_outputs();
  res.report = sim.report();
  for (const auto& pkt : packets) {
    const auto vals = isa::unpack_int8(pkt.words, std::size_t(pkt.channels) * std::size_t(sh.o_w));
    for (int ow = 0; ow < sh.o_w; ++ow) {
      for (int p = 0; p < pkt.channels; ++p) {
        res.output.at(pkt.h, ow, pkt.c_base + p) = vals[std::size_t(ow * pkt.channels + p)];
      }
    }
  }
  return res;
}

}  // namespace mm2im
