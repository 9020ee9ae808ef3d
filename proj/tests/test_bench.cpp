#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace mm2im;
using namespace mm2im::bench;

namespace {

const SimConfig kCfg{};
const PlatformParams kPlat = PlatformParams::matching(kCfg);

SweepSpec small_spec() {
  SweepSpec s;
  s.o_c = {3, 9};
  s.ks = {2, 3};
  s.i_h = {3};
  s.i_c = {5, 17};
  s.s = {1, 2, 3};
  return s;
}

std::size_t columns(const std::string& line) {
  return std::size_t(std::count(line.begin(), line.end(), ',')) + 1;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(Sweep, DefaultGridHas216Configs) {
  const auto shapes = SweepSpec{}.shapes();
  EXPECT_EQ(shapes.size(), 216u);
  std::set<std::string> distinct;
  for (const auto& sh : shapes) distinct.insert(to_string(sh));
  EXPECT_EQ(distinct.size(), 216u);
  EXPECT_EQ(shapes.front(), derive_shape(7, 7, 32, 3, 16, 1));
  EXPECT_EQ(shapes[1], derive_shape(7, 7, 32, 3, 16, 2));
  EXPECT_EQ(shapes.back(), derive_shape(11, 11, 256, 7, 64, 2));
  for (const auto& s : shapes) EXPECT_FALSE(s.stride_exceeds_kernel());
}

TEST(Sweep, SpecValidation) {
  SweepSpec s;
  s.ks = {};
  EXPECT_THROW(s.validate(), error);
  s = SweepSpec{};
  s.i_c = {32, 0};
  EXPECT_THROW(s.validate(), error);
  EXPECT_THROW(run_sweep(s, kCfg, kPlat, 1, 1), error);
  EXPECT_NO_THROW(SweepSpec{}.validate());
}

TEST(Sweep, StrideAboveKernelRowsAreSkippedWithReason) {
  const auto rows = run_sweep(small_spec(), kCfg, kPlat, 1, 1);
  ASSERT_EQ(rows.size(), 24u);
  int skipped = 0;
  for (const auto& r : rows) {
    if (r.shape.s > r.shape.ks) {
      ++skipped;
      EXPECT_TRUE(r.skipped);
      EXPECT_EQ(r.skip_reason, "stride_exceeds_kernel");
    } else {
      EXPECT_FALSE(r.skipped);
      EXPECT_TRUE(r.bit_exact) << r.shape;
    }
  }
  EXPECT_EQ(skipped, 4);  // ks=2, s=3
  std::ostringstream os;
  write_sweep_csv(os, rows);
  EXPECT_NE(os.str().find(",skipped:stride_exceeds_kernel,"), std::string::npos);
}

TEST(Sweep, CsvIsStableAndSeedReproducible) {
  std::ostringstream a, b, c, d;
  write_sweep_csv(a, run_sweep(small_spec(), kCfg, kPlat, 9, 1));
  write_sweep_csv(b, run_sweep(small_spec(), kCfg, kPlat, 9, 1));
  write_sweep_csv(c, run_sweep(small_spec(), kCfg, kPlat, 9, 3));
  write_sweep_csv(d, run_sweep(small_spec(), kCfg, kPlat, 10, 1));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str(), c.str());
  EXPECT_NE(a.str(), d.str());  // data seeds differ

  const auto ls = lines(a.str());
  ASSERT_EQ(ls.size(), 25u);
  EXPECT_EQ(ls[0], std::string("index,") + layer_csv_header());
  for (const auto& l : ls) EXPECT_EQ(columns(l), columns(ls[0])) << l;
  EXPECT_EQ(ls[1].substr(0, 2), "0,");
}

TEST(Sweep, HeaderColumnOrder) {
  const std::string h = layer_csv_header();
  EXPECT_EQ(h.substr(0, 24), "o_c,ks,i_h,i_w,i_c,s,sta");
  EXPECT_LT(h.find(",d_o,"), h.find(",d_r,"));
  EXPECT_LT(h.find(",cycles_total,"), h.find(",model_cycles_on_chip,"));
  EXPECT_EQ(h.substr(h.size() - 9), "bit_exact");
}

TEST(Sweep, ConfigSeedsAreDistinct) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(config_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_NE(config_seed(1, 0), config_seed(2, 0));
}

TEST(Sweep, BitExactFailureNamesConfigAndSeed) {
  const bit_exact_failure f(test::kWorked, 77);
  EXPECT_NE(std::string(f.what()).find("tconv(2,2,2,3,2,1)"), std::string::npos);
  EXPECT_NE(std::string(f.what()).find("data_seed=77"), std::string::npos);
  EXPECT_EQ(f.data_seed, 77u);
}

TEST(Sweep, DropRateTrendsOverDefaultGrid) {
  std::map<int, std::vector<double>> by_ks, by_s, by_ih;
  for (const auto& sh : SweepSpec{}.shapes()) {
    const double dr = compute_metrics(sh).d_r;
    by_ks[sh.ks].push_back(dr);
    by_s[sh.s].push_back(dr);
    by_ih[sh.i_h].push_back(dr);
  }
  auto means = [](const std::map<int, std::vector<double>>& m) {
    std::vector<double> out;
    for (const auto& [k, v] : m) {
      double sum = 0;
      for (double x : v) sum += x;
      out.push_back(sum / double(v.size()));
    }
    return out;
  };
  const auto ks = means(by_ks), s = means(by_s), ih = means(by_ih);
  EXPECT_LT(ks[0], ks[1]);
  EXPECT_LT(ks[1], ks[2]);
  EXPECT_GT(s[0], s[1]);
  EXPECT_GT(ih[0], ih[1]);
  EXPECT_GT(ih[1], ih[2]);
}

TEST(Zoo, OpCountsMatchDisplayedValues) {
  const std::map<std::string, std::int64_t> want{
      {"DCGAN_1", 419430400},        {"DCGAN_2", 419430400},
      {"DCGAN_3", 419430400},        {"DCGAN_4", 19660800},
      {"FCN", 14112},                {"StyleTransfer_1", 603979776},
      {"StyleTransfer_2", 603979776}, {"StyleTransfer_3", 1019215872},
      {"FSRCNN", 10616832}};
  const auto rows = run_zoo(kCfg, kPlat, 1, false, 1);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& z : rows) {
    EXPECT_EQ(z.ops, want.at(z.entry.name)) << z.entry.name;
    EXPECT_TRUE(z.ops_match) << z.entry.name << " " << z.ops_display;
    EXPECT_EQ(z.entry.s, 2);
    EXPECT_FALSE(z.simulated);
    EXPECT_EQ(z.layer.skip_reason, "not_simulated");
  }
}

TEST(Zoo, DisplayPrecision) {
  EXPECT_EQ(format_ops_like(419430400, "420M"), "420M");
  EXPECT_EQ(format_ops_like(1019215872, "1020M"), "1020M");
  EXPECT_EQ(format_ops_like(10616832, "11M"), "11M");
  EXPECT_EQ(format_ops_like(14112, "14K"), "14K");
  EXPECT_EQ(format_ops_like(19660800, "20M"), "20M");
  EXPECT_EQ(format_ops_like(1049000000, "1000M"), "1000M");
  EXPECT_EQ(format_ops_like(1051000000, "1050M"), "1050M");
  EXPECT_EQ(format_ops_like(1500000000, "1000M"), "2000M");
  EXPECT_EQ(format_ops_like(1500, "1500"), "1500");
  EXPECT_EQ(format_ops_like(2500000000, "3G"), "3G");
  EXPECT_THROW(format_ops_like(1, ""), error);
}

TEST(Zoo, CsvHasOneRowPerLayer) {
  std::ostringstream os;
  write_zoo_csv(os, run_zoo(kCfg, kPlat, 1, false, 1));
  const auto ls = lines(os.str());
  ASSERT_EQ(ls.size(), 10u);
  for (const auto& l : ls) EXPECT_EQ(columns(l), columns(ls[0]));
  EXPECT_EQ(ls[1].substr(0, 34), "DCGAN_1,419430400,420M,420M,true,5");
  EXPECT_NE(ls[1].find(",skipped:not_simulated,"), std::string::npos);
}

TEST(Validate, SmallRunAgrees) {
  const auto cases = run_validate(40, 5, kCfg, 2);
  ASSERT_EQ(cases.size(), 40u);
  for (const auto& c : cases) EXPECT_TRUE(c.ok()) << c.shape;
  std::ostringstream a, b;
  write_validate_csv(a, cases);
  write_validate_csv(b, run_validate(40, 5, kCfg, 1));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Validate, RandomShapesRespectBounds) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const auto sh = random_shape(rng);
    ASSERT_LE(sh.i_h, 16);
    ASSERT_LE(sh.i_w, 16);
    ASSERT_LE(sh.i_c, 64);
    ASSERT_LE(sh.ks, 9);
    ASSERT_LE(sh.s, 3);
    ASSERT_LE(sh.s, sh.ks);
    ASSERT_LE(sh.o_c, 20);
  }
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, 3,
                            [](std::size_t i) {
                              if (i == 4) throw error("boom");
                            }),
               error);
  std::vector<int> hit(50, 0);
  parallel_for(50, 4, [&](std::size_t i) { hit[i] += 1; });
  EXPECT_EQ(std::count(hit.begin(), hit.end(), 1), 50);
}
