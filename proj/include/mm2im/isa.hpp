#pragma once

#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "mm2im/error.hpp"
#include "mm2im/shape.hpp"

// Host -> accelerator micro-ISA. A stream is a sequence of 32-bit words;
// every message starts with its opcode word, followed by a fixed header and
// an optional data payload whose length the header determines. int8 data is
// packed four per word, little-endian (element i sits in bits 8*(i%4) of
// word i/4), and the last word of a payload is zero-padded. Signed fields are
// stored as two's complement. See docs/isa.md for the framing tables.

namespace mm2im::isa {

enum class Opcode : std::uint32_t {
  Configure = 0x01,
  LoadWeights = 0x02,
  LoadInput = 0x04,
  Schedule = 0x08,
  StoreOutput = 0x10,
};

inline std::string_view mnemonic(Opcode op) {
  switch (op) {
    case Opcode::Configure: return "CONFIGURE";
    case Opcode::LoadWeights: return "LOAD_WEIGHTS";
    case Opcode::LoadInput: return "LOAD_INPUT";
    case Opcode::Schedule: return "SCHEDULE";
    case Opcode::StoreOutput: return "STORE_OUTPUT";
  }
  return "UNKNOWN";
}

// Configuration registers. Sets up the mapper, the PM array and the PPU for
// one output-channel tile [c_base, c_base + active_pms).
struct Configure {
  std::int32_t i_h = 0, i_w = 0, i_c = 0, ks = 0, o_c = 0, s = 0;
  std::int32_t pad_top = 0, pad_left = 0, o_h = 0, o_w = 0;
  std::int32_t input_zero = 0, output_zero = 0;
  std::int32_t requant_multiplier = 0, requant_shift = 0;
  std::int32_t row_id = 0, row_width = 0;
  std::int32_t x = 0, uf = 0;  // echoed for sanity checking
  std::int32_t c_base = 0, active_pms = 0;

  static constexpr std::size_t kWords = 21;  // including the opcode

  friend bool operator==(const Configure&, const Configure&) = default;
};

// One filter block (ks * ks * i_c weights, tap-major) and one bias per PM.
struct LoadWeights {
  std::int32_t filter_elems = 0;
  std::vector<std::int32_t> bias;  // one per block
  std::vector<std::int8_t> data;   // bias.size() * filter_elems

  std::size_t num_filters() const noexcept { return bias.size(); }

  friend bool operator==(const LoadWeights&, const LoadWeights&) = default;
};

// Consecutive input rows [first_row, first_row + num_rows), each i_w * i_c.
struct LoadInput {
  std::int32_t first_row = 0;
  std::int32_t row_elems = 0;
  std::vector<std::int8_t> data;

  std::size_t num_rows() const noexcept {
    return row_elems > 0 ? data.size() / std::size_t(row_elems) : 0;
  }

  friend bool operator==(const LoadInput&, const LoadInput&) = default;
};

struct Schedule {
  std::int32_t h = 0;
  std::int32_t c_base = 0;
  friend bool operator==(const Schedule&, const Schedule&) = default;
};

struct StoreOutput {
  std::int32_t h = 0;
  std::int32_t c_base = 0;
  friend bool operator==(const StoreOutput&, const StoreOutput&) = default;
};

using Instruction = std::variant<Configure, LoadWeights, LoadInput, Schedule, StoreOutput>;

inline Opcode opcode_of(const Instruction& ins) {
  static constexpr Opcode kOps[] = {Opcode::Configure, Opcode::LoadWeights, Opcode::LoadInput,
                                    Opcode::Schedule, Opcode::StoreOutput};
  return kOps[ins.index()];
}

inline bool is_opcode(std::uint32_t w) {
  return w == 0x01 || w == 0x02 || w == 0x04 || w == 0x08 || w == 0x10;
}

inline std::size_t packed_words(std::size_t bytes) { return (bytes + 3) / 4; }

inline void pack_int8(std::span<const std::int8_t> bytes, std::vector<std::uint32_t>& out) {
  const std::size_t base = out.size();
  out.resize(base + packed_words(bytes.size()), 0u);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[base + i / 4] |= std::uint32_t(std::uint8_t(bytes[i])) << (8 * (i % 4));
  }
}

inline std::vector<std::int8_t> unpack_int8(std::span<const std::uint32_t> words,
                                            std::size_t count) {
  std::vector<std::int8_t> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::int8_t(std::uint8_t(words[i / 4] >> (8 * (i % 4))));
  }
  return out;
}

inline Configure make_configure(const TConvShape& sh) {
  Configure c;
  c.i_h = sh.i_h;
  c.i_w = sh.i_w;
  c.i_c = sh.i_c;
  c.ks = sh.ks;
  c.o_c = sh.o_c;
  c.s = sh.s;
  c.pad_top = sh.pad_top;
  c.pad_left = sh.pad_left;
  c.o_h = sh.o_h;
  c.o_w = sh.o_w;
  c.row_width = sh.i_w;
  return c;
}

/// Rebuilds the layer shape from the registers; throws shape_error when the
/// derived registers disagree with the primary ones.
inline TConvShape shape_of(const Configure& c) {
  TConvShape sh = derive_shape(c.i_h, c.i_w, c.i_c, c.ks, c.o_c, c.s);
  if (sh.pad_top != c.pad_top || sh.pad_left != c.pad_left || sh.o_h != c.o_h ||
      sh.o_w != c.o_w) {
    throw shape_error("configure registers are inconsistent with " + to_string(sh));
  }
  return sh;
}

inline void encode_into(const Instruction& ins, std::vector<std::uint32_t>& out) {
  auto word = [&out](std::int64_t v) { out.push_back(std::uint32_t(std::int32_t(v))); };
  out.push_back(std::uint32_t(opcode_of(ins)));
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Configure>) {
          for (std::int32_t v : {m.i_h, m.i_w, m.i_c, m.ks, m.o_c, m.s, m.pad_top, m.pad_left,
                                 m.o_h, m.o_w, m.input_zero, m.output_zero,
                                 m.requant_multiplier, m.requant_shift, m.row_id, m.row_width,
                                 m.x, m.uf, m.c_base, m.active_pms}) {
            word(v);
          }
        } else if constexpr (std::is_same_v<T, LoadWeights>) {
          if (m.filter_elems < 0 ||
              m.data.size() != m.bias.size() * std::size_t(m.filter_elems)) {
            throw error("LoadWeights payload size does not match num_filters * filter_elems");
          }
          word(std::int64_t(m.bias.size()));
          word(m.filter_elems);
          for (std::int32_t b : m.bias) word(b);
          pack_int8(m.data, out);
        } else if constexpr (std::is_same_v<T, LoadInput>) {
          if (m.row_elems <= 0 || m.data.size() % std::size_t(m.row_elems) != 0) {
            throw error("LoadInput payload is not a whole number of rows");
          }
          word(m.first_row);
          word(std::int64_t(m.num_rows()));
          word(m.row_elems);
          pack_int8(m.data, out);
        } else {
          word(m.h);
          word(m.c_base);
        }
      },
      ins);
}

inline std::vector<std::uint32_t> encode(const Instruction& ins) {
  std::vector<std::uint32_t> out;
  encode_into(ins, out);
  return out;
}

struct Decoded {
  Instruction instruction;
  std::span<const std::uint32_t> rest;
};

namespace detail {

inline void need(std::span<const std::uint32_t> w, std::size_t n, Opcode op) {
  if (w.size() < n) {
    throw underflow_error(std::string(mnemonic(op)) + " needs " + std::to_string(n) +
                          " words, stream has " + std::to_string(w.size()));
  }
}

inline std::int32_t count_field(std::uint32_t w, const char* what) {
  if (w > 0x7fffffffu) throw decode_error(std::string(what) + " field out of range");
  return std::int32_t(w);
}

inline std::vector<std::int8_t> take_payload(std::span<const std::uint32_t> w,
                                             std::size_t offset, std::uint64_t bytes,
                                             Opcode op) {
  const std::uint64_t words = (bytes + 3) / 4;
  if (w.size() - offset < words) {
    throw underflow_error(std::string(mnemonic(op)) + " payload truncated: needs " +
                          std::to_string(words) + " words, stream has " +
                          std::to_string(w.size() - offset));
  }
  const auto payload = w.subspan(offset, std::size_t(words));
  if (bytes % 4 != 0 && (payload.back() >> (8 * (bytes % 4))) != 0) {
    throw decode_error(std::string(mnemonic(op)) + " padding bytes must be zero");
  }
  return unpack_int8(payload, std::size_t(bytes));
}

}  // namespace detail

/// Decodes the message at the front of `words`.
/// Unknown opcode -> decode_error; truncated message -> underflow_error.
inline Decoded decode(std::span<const std::uint32_t> words) {
  if (words.empty()) throw underflow_error("empty stream");
  if (!is_opcode(words[0])) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%02x", unsigned(words[0]));
    throw decode_error(std::string("unknown opcode ") + buf);
  }
  const auto op = Opcode(words[0]);
  auto i32 = [&](std::size_t i) { return std::int32_t(words[i]); };
  switch (op) {
    case Opcode::Configure: {
      detail::need(words, Configure::kWords, op);
      Configure c;
      std::int32_t* fields[] = {&c.i_h, &c.i_w, &c.i_c, &c.ks, &c.o_c, &c.s, &c.pad_top,
                                &c.pad_left, &c.o_h, &c.o_w, &c.input_zero, &c.output_zero,
                                &c.requant_multiplier, &c.requant_shift, &c.row_id,
                                &c.row_width, &c.x, &c.uf, &c.c_base, &c.active_pms};
      for (std::size_t i = 0; i < Configure::kWords - 1; ++i) *fields[i] = i32(i + 1);
      return {c, words.subspan(Configure::kWords)};
    }
    case Opcode::LoadWeights: {
      detail::need(words, 3, op);
      LoadWeights lw;
      const auto n = detail::count_field(words[1], "num_filters");
      lw.filter_elems = detail::count_field(words[2], "filter_elems");
      if (words.size() - 3 < std::size_t(n)) {
        throw underflow_error("LOAD_WEIGHTS bias words truncated");
      }
      lw.bias.reserve(std::size_t(n));
      for (std::int32_t i = 0; i < n; ++i) lw.bias.push_back(i32(3 + std::size_t(i)));
      const std::uint64_t bytes = std::uint64_t(n) * std::uint64_t(lw.filter_elems);
      const std::size_t off = 3 + std::size_t(n);
      lw.data = detail::take_payload(words, off, bytes, op);
      return {std::move(lw), words.subspan(off + std::size_t((bytes + 3) / 4))};
    }
    case Opcode::LoadInput: {
      detail::need(words, 4, op);
      LoadInput li;
      li.first_row = i32(1);
      const auto rows = detail::count_field(words[2], "num_rows");
      li.row_elems = detail::count_field(words[3], "row_elems");
      if (li.row_elems == 0) throw decode_error("LOAD_INPUT row_elems must be positive");
      const std::uint64_t bytes = std::uint64_t(rows) * std::uint64_t(li.row_elems);
      li.data = detail::take_payload(words, 4, bytes, op);
      return {std::move(li), words.subspan(4 + std::size_t((bytes + 3) / 4))};
    }
    case Opcode::Schedule:
      detail::need(words, 3, op);
      return {Schedule{i32(1), i32(2)}, words.subspan(3)};
    case Opcode::StoreOutput:
      detail::need(words, 3, op);
      return {StoreOutput{i32(1), i32(2)}, words.subspan(3)};
  }
  throw decode_error("unreachable opcode");
}

inline std::vector<Instruction> decode_stream(std::span<const std::uint32_t> words) {
  std::vector<Instruction> out;
  while (!words.empty()) {
    auto d = decode(words);
    out.push_back(std::move(d.instruction));
    words = d.rest;
  }
  return out;
}

inline std::vector<std::uint32_t> encode_stream(std::span<const Instruction> messages) {
  std::vector<std::uint32_t> out;
  for (const auto& m : messages) encode_into(m, out);
  return out;
}

}  // namespace mm2im::isa
