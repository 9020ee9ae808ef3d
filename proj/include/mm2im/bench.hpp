#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mm2im/config.hpp"
#include "mm2im/driver.hpp"
#include "mm2im/mapping.hpp"
#include "mm2im/perf_model.hpp"
#include "mm2im/quant.hpp"
#include "mm2im/reference.hpp"
#include "mm2im/shape.hpp"
#include "mm2im/simulator.hpp"
#include "mm2im/tensor.hpp"

namespace mm2im::bench {

// ---------------------------------------------------------------------------
// Random layer data

struct LayerData {
  Int8Tensor input;
  Int8Tensor filters;
  QuantParams quant;
};

/// Per-config seed: the config index mixed into the run seed.
inline std::uint64_t config_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline LayerData random_layer(const TConvShape& sh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> i8(-128, 127);
  LayerData d{make_input(sh), make_filters(sh), {}};
  for (auto& v : d.input.data()) v = std::int8_t(i8(rng));
  for (auto& v : d.filters.data()) v = std::int8_t(i8(rng));

  std::uniform_int_distribution<int> zin(-8, 8), zout(-16, 16), b(-2000, 2000);
  std::vector<std::int32_t> bias(std::size_t(sh.o_c));
  for (auto& v : bias) v = b(rng);
  // Scale so a typical accumulator lands inside the int8 range.
  const double spread = 128.0 * 128.0 * std::sqrt(double(sh.i_c) * sh.ks * sh.ks);
  std::uniform_real_distribution<double> jitter(0.5, 2.0);
  const double ratio = 96.0 / spread * jitter(rng);
  const int in_zero = zin(rng);
  const int out_zero = zout(rng);
  d.quant = make_quant(0.02, ratio / 0.02 * 0.05, 0.05, in_zero, out_zero, std::move(bias));
  return d;
}

// ---------------------------------------------------------------------------
// Sweep

struct SweepSpec {
  std::vector<int> o_c{16, 32, 64};
  std::vector<int> ks{3, 5, 7};
  std::vector<int> i_h{7, 9, 11};  // i_w = i_h
  std::vector<int> i_c{32, 64, 128, 256};
  std::vector<int> s{1, 2};

  void validate() const {
    for (const auto* v : {&o_c, &ks, &i_h, &i_c, &s}) {
      if (v->empty()) throw error("sweep value lists must not be empty");
      for (int x : *v) {
        if (x < 1) throw error("sweep values must be positive");
      }
    }
  }

  /// Grid in o_c, ks, i_h, i_c, s nesting order (s fastest).
  std::vector<TConvShape> shapes() const {
    std::vector<TConvShape> out;
    for (int oc : o_c)
      for (int k : ks)
        for (int ih : i_h)
          for (int ic : i_c)
            for (int st : s) out.push_back(derive_shape(ih, ih, ic, k, oc, st));
    return out;
  }
};

struct LayerStats {
  TConvShape shape;
  bool skipped = false;
  std::string skip_reason;
  std::uint64_t data_seed = 0;
  MappingMetrics metrics;
  SimReport sim;  // counters only
  PerfEstimate model_on_chip;
  PerfEstimate model_host_omap;
  double model_cycles_on_chip = 0;
  double model_cycles_host_omap = 0;
  double model_rel_error = 0;  // |model - sim| / sim, on-chip variant
  bool bit_exact = false;
};

class bit_exact_failure : public error {
 public:
  bit_exact_failure(const TConvShape& sh, std::uint64_t seed)
      : error("simulator output differs from direct_tconv for " + to_string(sh) +
              " data_seed=" + std::to_string(seed)),
        shape(sh),
        data_seed(seed) {}
  TConvShape shape;
  std::uint64_t data_seed;
};

/// Plans, simulates and models one layer and checks the simulator against
/// the direct oracle.
inline LayerStats evaluate_layer(const TConvShape& sh, const SimConfig& cfg,
                                 const PlatformParams& plat, std::uint64_t data_seed) {
  LayerStats st;
  st.shape = sh;
  st.data_seed = data_seed;
  st.metrics = compute_metrics(sh);
  if (sh.stride_exceeds_kernel()) {
    st.skipped = true;
    st.skip_reason = "stride_exceeds_kernel";
    return st;
  }
  const auto data = random_layer(sh, data_seed);
  const auto plan = plan_layer(sh, data.quant, data.input, data.filters, cfg);
  Simulator sim(cfg);
  auto run = run_layer(plan, sim);
  st.sim = std::move(run.report);
  st.bit_exact = run.output == direct_tconv(sh, data.quant, data.input, data.filters);

  st.model_on_chip = estimate(sh, cfg, plat, MapVariant::on_chip_mapper);
  st.model_host_omap = estimate(sh, cfg, plat, MapVariant::host_omap);
  st.model_cycles_on_chip = st.model_on_chip.cycles(plat.freq);
  st.model_cycles_host_omap = st.model_host_omap.cycles(plat.freq);
  const double simc = double(st.sim.cycles.total);
  st.model_rel_error = simc > 0 ? std::abs(st.model_cycles_on_chip - simc) / simc : 0.0;
  return st;
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, unsigned(n ? n : 1)));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
        next = n;
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

/// One row per grid point, in grid order regardless of thread count.
/// Throws bit_exact_failure on the first mismatching config (lowest index).
inline std::vector<LayerStats> run_sweep(const SweepSpec& spec, const SimConfig& cfg,
                                         const PlatformParams& plat, std::uint64_t seed,
                                         unsigned threads = default_threads()) {
  spec.validate();
  const auto shapes = spec.shapes();
  std::vector<LayerStats> rows(shapes.size());
  parallel_for(shapes.size(), threads, [&](std::size_t i) {
    rows[i] = evaluate_layer(shapes[i], cfg, plat, config_seed(seed, i));
  });
  for (const auto& r : rows) {
    if (!r.skipped && !r.bit_exact) throw bit_exact_failure(r.shape, r.data_seed);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Layer zoo

struct LayerZooEntry {
  const char* name;
  int o_c;
  int ks;
  int i_h;  // = i_w
  int i_c;
  int s;
  const char* expected_ops;  // as displayed, e.g. "420M"

  TConvShape shape() const { return derive_shape(i_h, i_h, i_c, ks, o_c, s); }
};

inline const std::vector<LayerZooEntry>& layer_zoo() {
  static const std::vector<LayerZooEntry> zoo{
      {"DCGAN_1", 512, 5, 4, 1024, 2, "420M"},
      {"DCGAN_2", 256, 5, 8, 512, 2, "420M"},
      {"DCGAN_3", 128, 5, 16, 256, 2, "420M"},
      {"DCGAN_4", 3, 5, 32, 128, 2, "20M"},
      {"FCN", 21, 4, 1, 21, 2, "14K"},
      {"StyleTransfer_1", 64, 3, 64, 128, 2, "604M"},
      {"StyleTransfer_2", 32, 3, 128, 64, 2, "604M"},
      {"StyleTransfer_3", 3, 9, 256, 32, 2, "1020M"},
      {"FSRCNN", 2, 9, 32, 32, 2, "11M"},
  };
  return zoo;
}

/// 2 * M * N * K.
inline std::int64_t op_count(const TConvShape& sh) { return 2 * sh.m() * sh.n() * sh.k(); }

/// Formats `ops` the way `like` is written: same unit suffix (K, M, G) and
/// as many significant digits as `like` has before its trailing zeros.
inline std::string format_ops_like(std::int64_t ops, std::string_view like) {
  if (like.empty()) throw error("empty op-count template");
  const char suffix = like.back();
  double unit = 1;
  std::string_view digits = like;
  if (suffix == 'K' || suffix == 'M' || suffix == 'G') {
    unit = suffix == 'K' ? 1e3 : (suffix == 'M' ? 1e6 : 1e9);
    digits.remove_suffix(1);
  }
  std::size_t sig = digits.find_last_not_of('0');
  sig = sig == std::string_view::npos ? 1 : sig + 1;
  const double v = double(ops) / unit;
  const int magnitude = v > 0 ? int(std::floor(std::log10(v))) : 0;
  const double quantum = std::pow(10.0, magnitude + 1 - int(sig));
  const auto rounded = static_cast<std::int64_t>(std::llround(std::round(v / quantum) * quantum));
  std::string out = std::to_string(rounded);
  if (unit != 1) out += suffix;
  return out;
}

struct ZooStats {
  LayerZooEntry entry;
  std::int64_t ops = 0;
  std::string ops_display;
  bool ops_match = false;
  LayerStats layer;  // simulation fields empty unless simulated
  bool simulated = false;
};

inline std::vector<ZooStats> run_zoo(const SimConfig& cfg, const PlatformParams& plat,
                                     std::uint64_t seed, bool simulate,
                                     unsigned threads = default_threads()) {
  const auto& zoo = layer_zoo();
  std::vector<ZooStats> rows(zoo.size());
  parallel_for(zoo.size(), threads, [&](std::size_t i) {
    ZooStats z;
    z.entry = zoo[i];
    const auto sh = zoo[i].shape();
    z.ops = op_count(sh);
    z.ops_display = format_ops_like(z.ops, zoo[i].expected_ops);
    z.ops_match = z.ops_display == zoo[i].expected_ops;
    if (simulate) {
      z.layer = evaluate_layer(sh, cfg, plat, config_seed(seed, i));
      z.simulated = true;
    } else {
      z.layer.shape = sh;
      z.layer.metrics = compute_metrics(sh);
      z.layer.skipped = true;
      z.layer.skip_reason = "not_simulated";
    }
    rows[i] = std::move(z);
  });
  for (const auto& r : rows) {
    if (r.simulated && !r.layer.skipped && !r.layer.bit_exact) {
      throw bit_exact_failure(r.layer.shape, r.layer.data_seed);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Oracle-equivalence fuzzing

struct ValidateCase {
  TConvShape shape;
  std::uint64_t data_seed = 0;
  bool zero_insertion_ok = false;
  bool iom_ok = false;
  bool sim_ok = false;
  bool ok() const { return zero_insertion_ok && iom_ok && sim_ok; }
};

/// Random shape with i_h, i_w <= 16, i_c <= 64, ks <= 9, s in {1,2,3},
/// s <= ks and o_c <= 20.
inline TConvShape random_shape(std::mt19937_64& rng) {
  auto pick = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int ks = pick(1, 9);
  const int s = pick(1, std::min(3, ks));
  return derive_shape(pick(1, 16), pick(1, 16), pick(1, 64), ks, pick(1, 20), s);
}

inline ValidateCase validate_case(const TConvShape& sh, std::uint64_t data_seed,
                                  const SimConfig& cfg) {
  ValidateCase vc;
  vc.shape = sh;
  vc.data_seed = data_seed;
  const auto d = random_layer(sh, data_seed);
  const auto ref = direct_tconv(sh, d.quant, d.input, d.filters);
  vc.zero_insertion_ok = zero_insertion_tconv(sh, d.quant, d.input, d.filters) == ref;
  vc.iom_ok = iom_baseline_tconv(sh, d.quant, d.input, d.filters).output == ref;
  Simulator sim(cfg);
  vc.sim_ok = run_layer(plan_layer(sh, d.quant, d.input, d.filters, cfg), sim).output == ref;
  return vc;
}

inline std::vector<ValidateCase> run_validate(std::size_t count, std::uint64_t seed,
                                              const SimConfig& cfg,
                                              unsigned threads = default_threads()) {
  std::mt19937_64 rng(seed);
  std::vector<TConvShape> shapes;
  for (std::size_t i = 0; i < count; ++i) shapes.push_back(random_shape(rng));
  std::vector<ValidateCase> out(count);
  parallel_for(count, threads, [&](std::size_t i) {
    out[i] = validate_case(shapes[i], config_seed(seed, i), cfg);
  });
  return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

inline const char* layer_csv_header() {
  return "o_c,ks,i_h,i_w,i_c,s,status,m,n,k,d_o,d_r,effective_macs,macs_executed,"
         "macs_skipped,cycles_total,cycles_cu_compute,cycles_cu_load,cycles_cu_store,"
         "cycles_au,cycles_ppu,cycles_mapper,cycles_stall,cycles_transfer,"
         "model_cycles_on_chip,model_cycles_host_omap,model_omap_share,model_rel_error,"
         "bytes_weights_in,bytes_bias_in,bytes_inputs_in,bytes_outputs_out,bytes_omap_in,"
         "out_buf_high_water,row_buf_high_water,data_seed,bit_exact";
}

inline void write_layer_csv_fields(std::ostream& os, const LayerStats& r) {
  const auto& sh = r.shape;
  const auto& mm = r.metrics;
  const auto& c = r.sim.cycles;
  const auto& b = r.sim.bytes;
  os << sh.o_c << ',' << sh.ks << ',' << sh.i_h << ',' << sh.i_w << ',' << sh.i_c << ','
     << sh.s << ',' << (r.skipped ? "skipped:" + r.skip_reason : std::string("ok")) << ','
     << mm.m << ',' << mm.n << ',' << mm.k << ',' << mm.d_o << ',' << fmt(mm.d_r) << ','
     << mm.effective_macs << ',' << r.sim.macs_executed << ',' << r.sim.macs_skipped << ','
     << c.total << ',' << c.cu_compute << ',' << c.cu_load << ',' << c.cu_store << ',' << c.au
     << ',' << c.ppu << ',' << c.mapper << ',' << c.stall << ',' << c.transfer << ','
     << fmt(r.model_cycles_on_chip, 1) << ',' << fmt(r.model_cycles_host_omap, 1) << ','
     << fmt(r.model_host_omap.omap_share()) << ',' << fmt(r.model_rel_error) << ','
     << b.weights_in << ',' << b.bias_in << ',' << b.inputs_in << ',' << b.outputs_out << ','
     << b.omap_in << ',' << r.sim.out_buf_high_water << ',' << r.sim.row_buf_high_water << ','
     << r.data_seed << ',' << (r.bit_exact ? "true" : "false");
}

inline void write_sweep_csv(std::ostream& os, const std::vector<LayerStats>& rows) {
  os << "index," << layer_csv_header() << '\n';
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << i << ',';
    write_layer_csv_fields(os, rows[i]);
    os << '\n';
  }
}

inline void write_zoo_csv(std::ostream& os, const std::vector<ZooStats>& rows) {
  os << "name,ops,ops_display,expected_ops,ops_match," << layer_csv_header() << '\n';
  for (const auto& z : rows) {
    os << z.entry.name << ',' << z.ops << ',' << z.ops_display << ',' << z.entry.expected_ops
       << ',' << (z.ops_match ? "true" : "false") << ',';
    write_layer_csv_fields(os, z.layer);
    os << '\n';
  }
}

inline void write_validate_csv(std::ostream& os, const std::vector<ValidateCase>& rows) {
  os << "index,i_h,i_w,i_c,ks,o_c,s,data_seed,zero_insertion,iom_baseline,simulator\n";
  auto b = [](bool v) { return v ? "true" : "false"; };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const auto& sh = r.shape;
    os << i << ',' << sh.i_h << ',' << sh.i_w << ',' << sh.i_c << ',' << sh.ks << ',' << sh.o_c
       << ',' << sh.s << ',' << r.data_seed << ',' << b(r.zero_insertion_ok) << ','
       << b(r.iom_ok) << ',' << b(r.sim_ok) << '\n';
  }
}

}  // namespace mm2im::bench
