#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <utility>

#include "support.hpp"

using namespace mm2im;
using test::kWorked;

namespace {

using EntrySet = std::set<std::pair<int, int>>;

// Kept (tap, final index) pairs of one MatMul row, by direct col2im
// enumeration of the padded targets.
EntrySet brute_force_entries(const TConvShape& sh, std::int64_t row) {
  EntrySet out;
  const int ih = int(row / sh.i_w);
  const int iw = int(row % sh.i_w);
  for (int kh = 0; kh < sh.ks; ++kh)
    for (int kw = 0; kw < sh.ks; ++kw) {
      const int oh = ih * sh.s + kh - sh.pad_top;
      const int ow = iw * sh.s + kw - sh.pad_left;
      if (oh < 0 || oh >= sh.o_h || ow < 0 || ow >= sh.o_w) continue;
      out.insert({kh * sh.ks + kw, oh * sh.o_w + ow});
    }
  return out;
}

EntrySet as_set(const RowMaps& rm) {
  EntrySet s;
  for (const auto& e : rm.entries) s.insert({e.col, e.im_dex});
  return s;
}

// Cropped accumulators (no bias) built only from map entries of input rows
// [0, row_limit].
AccTensor map_accumulate(const TConvShape& sh, const bench::LayerData& d, int row_limit) {
  AccTensor acc({std::size_t(sh.o_h), std::size_t(sh.o_w), std::size_t(sh.o_c)});
  for (const auto& rm : generate_row_maps(sh, 0, std::int64_t{row_limit + 1} * sh.i_w)) {
    const int ih = int(rm.row_id / sh.i_w);
    const int iw = int(rm.row_id % sh.i_w);
    for (const auto& e : rm.entries) {
      for (int oc = 0; oc < sh.o_c; ++oc) {
        std::int32_t dot = 0;
        for (int ic = 0; ic < sh.i_c; ++ic) {
          dot += (d.input.at(ih, iw, ic) - d.quant.input_zero) *
                 d.filters.at(e.col / sh.ks, e.col % sh.ks, oc, ic);
        }
        acc.at(e.im_dex / sh.o_w, e.im_dex % sh.o_w, oc) += dot;
      }
    }
  }
  return acc;
}

Int8Tensor finish(const TConvShape& sh, const QuantParams& q, const AccTensor& acc) {
  auto out = make_output(sh);
  for (int oh = 0; oh < sh.o_h; ++oh)
    for (int ow = 0; ow < sh.o_w; ++ow)
      for (int oc = 0; oc < sh.o_c; ++oc) {
        out.at(oh, ow, oc) = requantize(acc.at(oh, ow, oc) + q.bias[std::size_t(oc)], q);
      }
  return out;
}

}  // namespace

TEST(RowMaps, WorkedExampleTotals) {
  const auto maps = generate_row_maps(kWorked, 0, kWorked.m());
  ASSERT_EQ(maps.size(), 4u);
  std::int64_t kept = 0;
  for (const auto& rm : maps) kept += std::int64_t(rm.entries.size());
  EXPECT_EQ(kept * kWorked.o_c, 32);
  EXPECT_EQ(kWorked.m() * kWorked.n() - kept * kWorked.o_c, 40);
}

TEST(RowMaps, WorkedExampleRowZeroMatchesCol2im) {
  const auto maps = generate_row_maps(kWorked, 0, 1);
  ASSERT_EQ(maps.size(), 1u);
  EXPECT_EQ(maps[0].row_id, 0);
  EXPECT_EQ(as_set(maps[0]), brute_force_entries(kWorked, 0));
  // Input (0,0) reaches final outputs (0,0),(0,1),(1,0),(1,1) via taps 4,5,7,8.
  EXPECT_EQ(as_set(maps[0]), (EntrySet{{4, 0}, {5, 1}, {7, 2}, {8, 3}}));
}

TEST(RowMaps, KernelEqualsStrideKeepsEveryTap) {
  const auto sh = derive_shape(3, 4, 2, 2, 3, 2);
  for (const auto& rm : generate_row_maps(sh, 0, sh.m())) {
    EXPECT_EQ(rm.entries.size(), 4u);
  }
  EXPECT_EQ(compute_metrics(sh).d_o, 0);
}

TEST(RowMaps, MatchBruteForceOverRandomShapes) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto sh = bench::random_shape(rng);
    const auto maps = generate_row_maps(sh, 0, sh.m());
    for (const auto& rm : maps) {
      ASSERT_EQ(as_set(rm), brute_force_entries(sh, rm.row_id)) << sh << " row " << rm.row_id;
      ASSERT_EQ(as_set(rm).size(), rm.entries.size()) << "duplicate entries";
      for (const auto& e : rm.entries) {
        ASSERT_GE(e.col, 0);
        ASSERT_LT(e.col, sh.ks * sh.ks);
        ASSERT_GE(e.im_dex, 0);
        ASSERT_LT(e.im_dex, sh.o_h * sh.o_w);
      }
    }
  }
}

TEST(RowMaps, StrideAboveKernel) {
  const auto sh = derive_shape(3, 3, 1, 2, 1, 3);
  for (const auto& rm : generate_row_maps(sh, 0, sh.m())) {
    EXPECT_EQ(as_set(rm), brute_force_entries(sh, rm.row_id));
    EXPECT_EQ(rm.entries.size(), 4u);
  }
}

TEST(RowMaps, TiledInvocationConcatenates) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sh = bench::random_shape(rng);
    const auto whole = generate_row_maps(sh, 0, sh.m());
    std::vector<RowMaps> pieces;
    std::int64_t r = 0;
    while (r < sh.m()) {
      const std::int64_t n = std::uniform_int_distribution<std::int64_t>(0, sh.m() - r)(rng);
      auto part = generate_row_maps(sh, r, n);
      pieces.insert(pieces.end(), part.begin(), part.end());
      r += n;
    }
    ASSERT_EQ(pieces, whole) << sh;
  }
}

TEST(RowMaps, RejectsOutOfRangeRows) {
  EXPECT_THROW(generate_row_maps(kWorked, -1, 1), range_error);
  EXPECT_THROW(generate_row_maps(kWorked, 0, 5), range_error);
  EXPECT_THROW(generate_row_maps(kWorked, 4, 1), range_error);
  EXPECT_THROW(generate_row_maps(kWorked, 0, -1), range_error);
  EXPECT_TRUE(generate_row_maps(kWorked, 4, 0).empty());
}

TEST(RowMaps, MapDrivenAccumulationReproducesOracle) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 80; ++trial) {
    const auto sh = bench::random_shape(rng);
    const auto d = bench::random_layer(sh, rng());
    const auto acc = map_accumulate(sh, d, sh.i_h - 1);
    ASSERT_EQ(finish(sh, d.quant, acc), direct_tconv(sh, d.quant, d.input, d.filters)) << sh;
  }
}

TEST(Metrics, WorkedExample) {
  const auto mm = compute_metrics(kWorked);
  EXPECT_EQ(mm.m, 4);
  EXPECT_EQ(mm.n, 18);
  EXPECT_EQ(mm.k, 2);
  EXPECT_EQ(mm.p_outs, 72);
  EXPECT_EQ(mm.d_o, 40);
  EXPECT_EQ(mm.d_r, 40.0 / 72.0);
  EXPECT_GT(mm.d_r, 0.55);
  EXPECT_EQ(mm.final_outs, 8);
  EXPECT_EQ(mm.padded_outs, 32);
  EXPECT_EQ(mm.space_gain_full, 9.0);
  EXPECT_EQ(mm.space_gain_no_skip, 2.25);
  EXPECT_EQ(mm.effective_macs, 64);
  EXPECT_EQ(mm.kept_entries, 16);
  EXPECT_FALSE(mm.stride_exceeds_kernel);
}

TEST(Metrics, DcganLayersDropUpToAboutAQuarter) {
  double max_dr = 0;
  for (const auto& z : bench::layer_zoo()) {
    if (std::string_view(z.name).substr(0, 5) == "DCGAN") {
      max_dr = std::max(max_dr, compute_metrics(z.shape()).d_r);
    }
  }
  EXPECT_DOUBLE_EQ(max_dr, 1.0 - (17.0 / 20.0) * (17.0 / 20.0));
  EXPECT_NEAR(max_dr, 0.28, 0.03);
}

TEST(Metrics, ConsistentWithMapsOverSweepGrid) {
  for (const auto& sh : bench::SweepSpec{}.shapes()) {
    const auto mm = compute_metrics(sh);
    std::int64_t kept = 0;
    for (const auto& rm : generate_row_maps(sh, 0, sh.m())) kept += std::int64_t(rm.entries.size());
    ASSERT_EQ(kept * sh.o_c, mm.m * mm.n - mm.d_o) << sh;
    ASSERT_EQ(mm.effective_macs, (mm.m * mm.n - mm.d_o) * mm.k);
    ASSERT_GE(mm.d_r, 0.0);
    ASSERT_LT(mm.d_r, 1.0);
    ASSERT_EQ(mm.d_r, double(mm.d_o) / double(mm.m * mm.n));
  }
}

TEST(Metrics, KeptEntriesCoverEveryFinalOutput) {
  // No final output is left without a contributing entry.
  const auto sh = derive_shape(5, 5, 1, 4, 1, 2);
  std::vector<int> hits(std::size_t(sh.o_h * sh.o_w), 0);
  for (const auto& rm : generate_row_maps(sh, 0, sh.m()))
    for (const auto& e : rm.entries) ++hits[std::size_t(e.im_dex)];
  for (int h : hits) EXPECT_GE(h, 1);
}

TEST(Schedule, PointwiseKernelIsIdentity) {
  const auto sh = derive_shape(6, 3, 2, 1, 2, 1);
  const auto rs = compute_i_end_row(sh);
  ASSERT_EQ(rs.i_end_row.size(), 6u);
  for (int h = 0; h < 6; ++h) EXPECT_EQ(rs.i_end_row[std::size_t(h)], h);
}

TEST(Schedule, WorkedExample) {
  EXPECT_EQ(compute_i_end_row(kWorked).i_end_row, (std::vector<int>{1, 1}));
}

TEST(Schedule, StrideTwoIsMonotoneAndEndsAtLastRow) {
  const auto rs = compute_i_end_row(derive_shape(7, 7, 32, 5, 16, 2));
  ASSERT_EQ(rs.i_end_row.size(), 14u);
  EXPECT_TRUE(std::is_sorted(rs.i_end_row.begin(), rs.i_end_row.end()));
  EXPECT_EQ(rs.i_end_row.back(), 6);
}

TEST(Schedule, SufficientAndMinimal) {
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 60; ++trial) {
    const auto sh = bench::random_shape(rng);
    const auto rs = compute_i_end_row(sh);
    ASSERT_EQ(rs.i_end_row.size(), std::size_t(sh.o_h));
    ASSERT_TRUE(std::is_sorted(rs.i_end_row.begin(), rs.i_end_row.end()));
    ASSERT_EQ(rs.i_end_row.back(), sh.i_h - 1);

    // All-ones data with positive weights: every contribution is nonzero, so
    // a missing input row shows up as a changed accumulator.
    bench::LayerData d{test::filled(make_input(sh), 1), test::filled(make_filters(sh), 1),
                       unit_quant(sh.o_c)};
    const auto full = map_accumulate(sh, d, sh.i_h - 1);
    for (int h = 0; h < sh.o_h; ++h) {
      const int end = rs.i_end_row[std::size_t(h)];
      ASSERT_GE(end, 0);
      ASSERT_LT(end, sh.i_h);
      const auto enough = map_accumulate(sh, d, end);
      const auto fewer = end > 0 ? map_accumulate(sh, d, end - 1) : AccTensor(full.dims());
      bool differs = false;
      for (int ow = 0; ow < sh.o_w; ++ow)
        for (int oc = 0; oc < sh.o_c; ++oc) {
          ASSERT_EQ(enough.at(h, ow, oc), full.at(h, ow, oc)) << sh << " h=" << h;
          differs |= fewer.at(h, ow, oc) != full.at(h, ow, oc);
        }
      ASSERT_TRUE(differs) << sh << " h=" << h << " is complete with one row fewer";
    }
  }
}

TEST(Schedule, TargetRowOfEntry) {
  const auto maps = generate_row_maps(kWorked, 0, 1);
  for (const auto& e : maps[0].entries) {
    EXPECT_EQ(target_out_row(kWorked, e), e.im_dex / kWorked.o_w);
  }
}
