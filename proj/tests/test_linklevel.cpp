#include <gtest/gtest.h>

#include <sstream>

#include "nrma/linklevel.hpp"

using namespace nrma;

namespace {

SchemeConfig cfg(SchemeKind s, int k, double cr, int info = 64) {
  SchemeConfig c;
  c.scheme = s;
  c.num_users = k;
  c.code_rate = cr;
  c.info_block_bits = info;
  c.seed = 5;
  return c;
}

BlerCurve curve(std::initializer_list<std::pair<double, double>> pts) {
  BlerCurve c;
  for (auto [s, b] : pts) c.push_back({s, b, 0, 0});
  return c;
}

}  // namespace

TEST(Geometry, BlockDrivenArithmetic) {
  const auto g = LinkGeometry::for_block(128, 0.2, 4, 6);
  EXPECT_EQ(g.payload_bits, 144);
  EXPECT_EQ(g.coded_bits(), 720);
  EXPECT_EQ(g.units, 360);
  EXPECT_EQ(g.info_bits(), 128);
  // 0.3: ceil(144 / 0.3) = 480 coded bits, 240 units, 960 REs split over 12 users.
  const auto h = LinkGeometry::for_block(128, 0.3, 4, 12);
  EXPECT_EQ(h.units, 240);
  EXPECT_EQ(h.oma_res_per_user(), 80);
  // Odd totals are rounded up until K divides the RE count.
  const auto odd = LinkGeometry::for_block(128, 0.7, 4, 6);
  EXPECT_EQ(odd.total_res() % 6, 0);
  EXPECT_GE(odd.coded_bits(), static_cast<int>(coded_length_for_rate(144, 0.7)));
}

TEST(Geometry, ResourceDriven) {
  const auto g = LinkGeometry::for_resources(1344, 0.5, 4, 6);
  EXPECT_EQ(g.units, 336);
  EXPECT_EQ(g.payload_bits, 336);
}

TEST(Geometry, EveryUserSpendsUnitEnergyPerSpreadingUnit) {
  // SCMA codewords, MUSA sequences and IDMA chips all normalise to 1 per unit.
  const auto cb = scma::build_codebook(4, 12, 4);
  for (int u = 0; u < 12; ++u) {
    double e = 0;
    for (int w = 0; w < 4; ++w)
      for (int r = 0; r < 4; ++r) e += std::norm(cb.codeword(u, w, r));
    EXPECT_NEAR(e / 4, 1.0, 1e-12);
  }
  EXPECT_NEAR(4 * 2 * std::pow(idma::chip_amplitude(4), 2), 1.0, 1e-12);
}

TEST(LinkSimulator, DropIsDeterministic) {
  for (auto s : kAllSchemes) {
    const LinkSimulator sim(cfg(s, 6, 0.3));
    EXPECT_EQ(sim.run_drop(3, 2.0), sim.run_drop(3, 2.0)) << to_string(s);
  }
}

TEST(LinkSimulator, HopelessSnrFailsEveryBlock) {
  for (auto s : kAllSchemes) {
    const LinkSimulator sim(cfg(s, 6, 0.3));
    for (std::uint64_t d = 0; d < 3; ++d) {
      const auto ok = sim.run_drop(d, -40.0);
      EXPECT_EQ(std::count(ok.begin(), ok.end(), true), 0) << to_string(s);
    }
  }
}

TEST(LinkSimulator, SingleUserHighSnrDecodes) {
  for (auto s : {SchemeKind::SCMA, SchemeKind::MUSA, SchemeKind::IDMA}) {
    auto c = cfg(s, 1, 0.5);
    c.channel = ChannelModel::AWGN;
    const LinkSimulator sim(c);
    for (std::uint64_t d = 0; d < 5; ++d) EXPECT_TRUE(sim.run_drop(d, 20.0)[0]) << to_string(s);
  }
}

TEST(LinkSimulator, OmaAwgnBlerFallsWithSnr) {
  auto c = cfg(SchemeKind::OMA, 4, 0.5);
  c.channel = ChannelModel::AWGN;
  const std::vector<double> snr{2.0, 6.0};
  const auto cv = run_bler(c, snr, {2000, 100, 1});
  EXPECT_LT(cv[1].bler, cv[0].bler);
}

TEST(LinkSimulator, UserOffsetsScaleReceivedPower) {
  // A user 40 dB down fails while the others still decode.
  const LinkSimulator sim(cfg(SchemeKind::SCMA, 6, 0.2));
  const std::vector<double> offsets{20, 20, 20, -40, 20, 20};
  const auto ok = sim.run_drop(1, 0.0, offsets);
  EXPECT_FALSE(ok[3]);
  EXPECT_EQ(std::count(ok.begin(), ok.end(), true), 5);
}

TEST(BlerHarness, StoppingRuleAndEstimate) {
  const LinkSimulator sim(cfg(SchemeKind::MUSA, 6, 0.3));
  const auto lo = run_bler_point(sim, -10.0, {1000, 20, 1});
  EXPECT_GE(lo.errors, 20);
  EXPECT_LT(lo.errors, 20 + 6);
  EXPECT_DOUBLE_EQ(lo.bler, static_cast<double>(lo.errors) / lo.blocks);
  EXPECT_EQ(lo.blocks % 6, 0);
  const auto hi = run_bler_point(sim, 30.0, {120, 1000, 1});
  EXPECT_EQ(hi.blocks, 120);
}

TEST(BlerHarness, ThreadCountDoesNotChangeResults) {
  const LinkSimulator sim(cfg(SchemeKind::IDMA, 8, 0.3));
  const auto a = run_bler_point(sim, 4.0, {240, 30, 1});
  const auto b = run_bler_point(sim, 4.0, {240, 30, 3});
  EXPECT_EQ(a.errors, b.errors);
  EXPECT_EQ(a.blocks, b.blocks);
}

TEST(BlerHarness, CrossingInterpolatesLogBler) {
  const auto c = curve({{0, 1.0}, {2, 0.5}, {4, 0.01}, {6, 0.001}});
  const auto x = crossing_snr(c, 0.1);
  ASSERT_TRUE(x.has_value());
  const double expect = 2 + (std::log10(0.5) - std::log10(0.1)) / (std::log10(0.5) - std::log10(0.01)) * 2;
  EXPECT_NEAR(*x, expect, 1e-12);
  EXPECT_FALSE(crossing_snr(curve({{0, 1.0}, {5, 0.3}}), 0.1).has_value());
  EXPECT_DOUBLE_EQ(*crossing_snr(curve({{0, 0.05}}), 0.1), 0.0);
}

TEST(McsSelect, PicksMaxSeUnderTarget) {
  const std::vector<double> grid{0, 5, 10};
  const std::vector<CandidateCurve> c{
      {1.5, 0.2, curve({{0, 0.5}, {5, 0.05}, {10, 0.0}})},
      {2.0, 0.2, curve({{0, 0.9}, {5, 0.2}, {10, 0.02}})},
      {1.5, 0.4, curve({{0, 1.0}, {5, 0.5}, {10, 0.3}})},
  };
  const auto t = select_mcs(SchemeKind::SCMA, grid, c);
  ASSERT_EQ(t.entries.size(), 3u);
  EXPECT_FALSE(t.entries[0].transmits());
  EXPECT_EQ(t.entries[0].sum_se, 0.0);
  EXPECT_EQ(t.entries[1].of, 1.5);
  EXPECT_NEAR(t.entries[1].sum_se, 1.5 * 2 * 0.2 * 0.95, 1e-12);
  EXPECT_EQ(t.entries[2].of, 2.0);
  EXPECT_NEAR(t.entries[2].sum_se, 2.0 * 2 * 0.2 * 0.98, 1e-12);
  EXPECT_DOUBLE_EQ(t.peak_se(), t.entries[2].sum_se);
}

TEST(McsSelect, TiesGoToLowerOverloadingThenLowerRate) {
  const std::vector<double> grid{0};
  // 1.5 * 0.4 = 2.0 * 0.3 = 3.0 * 0.2: equal SE at zero BLER.
  const std::vector<CandidateCurve> c{
      {3.0, 0.2, curve({{0, 0.0}})},
      {2.0, 0.3, curve({{0, 0.0}})},
      {1.5, 0.4, curve({{0, 0.0}})},
  };
  const auto t = select_mcs(SchemeKind::MUSA, grid, c);
  EXPECT_EQ(t.entries[0].of, 1.5);
  EXPECT_EQ(t.entries[0].cr, 0.4);
}

TEST(McsSelect, EnvelopeIsNonDecreasingForArbitraryCurves) {
  auto rng = rng_stream(4, 1);
  std::vector<double> grid;
  for (int s = -10; s <= 25; ++s) grid.push_back(s);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CandidateCurve> c;
    for (double of : kDefaultOverloadingSet)
      for (double cr : kDefaultCodeRateSet) {
        CandidateCurve cc{of, cr, {}};
        for (double s : grid) cc.curve.push_back({s, rng.uniform() * rng.uniform(), 0, 0});  // noisy, non-monotone
        c.push_back(cc);
      }
    const auto t = select_mcs(SchemeKind::IDMA, grid, c);
    for (std::size_t i = 1; i < t.entries.size(); ++i) EXPECT_GE(t.entries[i].sum_se, t.entries[i - 1].sum_se - 1e-12);
    for (const auto& e : t.entries)
      if (e.transmits()) {
        EXPECT_LE(e.bler, 0.1);
        EXPECT_NEAR(e.sum_se, e.of * 2 * e.cr * (1 - e.bler), 1e-12);
      }
  }
}

TEST(McsTable, LookupUsesGridPointAtOrBelow) {
  McsTable t{SchemeKind::SCMA, {{0, 1.5, 0.1, 0.3, 0}, {5, 2.0, 0.2, 0.8, 0}}};
  EXPECT_FALSE(t.lookup(-3).transmits());
  EXPECT_EQ(t.lookup(0).of, 1.5);
  EXPECT_EQ(t.lookup(4.9).of, 1.5);
  EXPECT_EQ(t.lookup(50).of, 2.0);
}

TEST(McsTable, BuildAtVeryLowSnrTransmitsNothing) {
  const std::vector<double> grid{-30.0};
  const std::vector<double> of{1.5}, cr{0.1, 0.5};
  for (auto s : {SchemeKind::SCMA, SchemeKind::MUSA, SchemeKind::IDMA}) {
    const auto t = build_mcs_table(cfg(s, 6, 0.1, 32), grid, of, cr, {{60, 10, 1}, 0.1, 0.01});
    EXPECT_FALSE(t.entries[0].transmits());
  }
}

TEST(McsCsv, RoundTripAndErrors) {
  McsTable t{SchemeKind::IDMA, {{-2, 0, 0, 0, 1}, {3, 1.5, 0.3, 0.81, 0.1}}};
  std::stringstream ss;
  write_mcs_csv(ss, t);
  ss << "# provenance\n";
  const auto back = read_mcs_csv(ss);
  ASSERT_EQ(back.count(SchemeKind::IDMA), 1u);
  const auto& b = back.at(SchemeKind::IDMA);
  ASSERT_EQ(b.entries.size(), 2u);
  EXPECT_FALSE(b.entries[0].transmits());
  EXPECT_EQ(b.entries[1].of, 1.5);
  EXPECT_NEAR(b.entries[1].bler, 0.1, 1e-6);
  std::stringstream bad("scheme,snr_db,of,cr,sum_se\nSCMA,1,x,0.2,0.3\n");
  try {
    read_mcs_csv(bad);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(BlerCsv, RowsPerPoint) {
  std::stringstream ss;
  write_bler_header(ss);
  write_bler_rows(ss, SchemeKind::SCMA, 1.5, 0.2, curve({{0, 0.5}, {1, 0.25}}));
  std::string line;
  int n = 0;
  while (std::getline(ss, line)) ++n;
  EXPECT_EQ(n, 3);
}
