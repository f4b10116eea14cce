#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/rng.hpp"

using namespace nrma;

namespace {

// Byte-wise table-driven CRC-16/CCITT-FALSE, written independently of the
// bit-serial routine under test.
std::uint16_t crc_table_driven(const std::string& s) {
  std::uint16_t table[256];
  for (int i = 0; i < 256; ++i) {
    std::uint16_t c = static_cast<std::uint16_t>(i << 8);
    for (int j = 0; j < 8; ++j) c = static_cast<std::uint16_t>((c & 0x8000) ? (c << 1) ^ 0x1021 : c << 1);
    table[i] = c;
  }
  std::uint16_t crc = 0xFFFF;
  for (unsigned char ch : s) crc = static_cast<std::uint16_t>((crc << 8) ^ table[((crc >> 8) ^ ch) & 0xFF]);
  return crc;
}

Bits ascii_bits(const std::string& s) {
  Bits out;
  for (unsigned char c : s)
    for (int i = 7; i >= 0; --i) out.push_back((c >> i) & 1);
  return out;
}

}  // namespace

TEST(OverloadingFactor, Examples) {
  EXPECT_DOUBLE_EQ(overloading_factor(6, 4), 1.5);
  EXPECT_DOUBLE_EQ(overloading_factor(4, 4), 1.0);
  EXPECT_DOUBLE_EQ(overloading_factor(12, 4), 3.0);
}

TEST(OverloadingFactor, ZeroArgumentsRejected) {
  EXPECT_THROW(overloading_factor(4, 0), InvalidArgument);
  EXPECT_THROW(overloading_factor(0, 4), InvalidArgument);
}

TEST(OverloadingFactor, ScaleInvariant) {
  for (int k = 1; k <= 16; ++k)
    for (int n = 1; n <= 8; ++n)
      for (int a = 1; a <= 5; ++a) EXPECT_DOUBLE_EQ(overloading_factor(a * k, a * n), overloading_factor(k, n));
}

TEST(OverloadingFactor, UsersForOverloading) {
  EXPECT_EQ(users_for_overloading(1.5, 4), 6);
  EXPECT_EQ(users_for_overloading(2.0, 4), 8);
  EXPECT_EQ(users_for_overloading(3.0, 4), 12);
  EXPECT_THROW(users_for_overloading(1.3, 4), InvalidArgument);
}

TEST(CodedLength, RoundsUpWithoutFloatingPointDrift) {
  EXPECT_EQ(coded_length_for_rate(128, 0.2), 640u);
  EXPECT_EQ(coded_length_for_rate(128, 0.5), 256u);
  EXPECT_EQ(coded_length_for_rate(144, 0.3), 480u);
  EXPECT_EQ(coded_length_for_rate(144, 0.7), 206u);
  EXPECT_THROW(coded_length_for_rate(128, 0.0), InvalidArgument);
  EXPECT_THROW(coded_length_for_rate(128, 1.5), InvalidArgument);
}

TEST(SchemeConfig, Validation) {
  SchemeConfig c;
  EXPECT_NO_THROW(c.validate());
  c.num_users = 4;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.scheme = SchemeKind::OMA;
  EXPECT_NO_THROW(c.validate());
  c.code_rate = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(SchemeKindNames, RoundTrip) {
  for (auto s : kAllSchemes) EXPECT_EQ(parse_scheme(to_string(s)), s);
  EXPECT_THROW(parse_scheme("PDMA"), InvalidArgument);
}

TEST(NoiseVariance, DecibelConversion) {
  EXPECT_DOUBLE_EQ(noise_variance(0.0), 1.0);
  EXPECT_NEAR(noise_variance(10.0), 0.1, 1e-15);
}

TEST(Rng, SameStreamReproduces) {
  auto a = rng_stream(42, 7), b = rng_stream(42, 7);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(a(), b());
    EXPECT_EQ(a.gaussian(), b.gaussian());
    EXPECT_EQ(a.uniform(), b.uniform());
  }
}

TEST(Rng, DistinctStreamsUncorrelated) {
  auto a = rng_stream(5, 0), b = rng_stream(5, 1);
  const int n = 100000;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.gaussian(), y = b.gaussian();
    sa += x, sb += y, saa += x * x, sbb += y * y, sab += x * y;
  }
  const double cov = sab / n - sa / n * sb / n;
  const double r = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::abs(r), 0.02);
}

TEST(Rng, GaussianMeanWithinClt) {
  auto a = rng_stream(11, 0);
  double s = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += a.gaussian();
  EXPECT_LT(std::abs(s / n), 0.004);
}

TEST(Rng, BelowStaysInRange) {
  auto a = rng_stream(3, 3);
  for (int i = 0; i < 10000; ++i) EXPECT_LT(a.below(7), 7u);
}

TEST(Crc, CheckValueMatchesIndependentRoutine) {
  EXPECT_EQ(crc_table_driven("123456789"), 0x29B1);
  EXPECT_EQ(crc::crc16(ascii_bits("123456789")), 0x29B1);
  for (const std::string s : {"", "a", "nrma", "The quick brown fox"})
    EXPECT_EQ(crc::crc16(ascii_bits(s)), crc_table_driven(s)) << s;
}

TEST(Crc, AttachThenCheckPasses) {
  auto rng = rng_stream(1, 99);
  for (int trial = 0; trial < 200; ++trial) {
    Bits b(1 + rng.below(300));
    for (auto& x : b) x = rng.bit();
    const auto blk = crc::attach(b);
    EXPECT_EQ(blk.size(), b.size() + 16);
    EXPECT_TRUE(crc::check(blk));
  }
}

TEST(Crc, EverySingleBitFlipDetected) {
  auto rng = rng_stream(2, 99);
  Bits b(144);
  for (auto& x : b) x = rng.bit();
  auto blk = crc::attach(b);
  for (std::size_t i = 0; i < blk.size(); ++i) {
    blk[i] ^= 1;
    EXPECT_FALSE(crc::check(blk)) << i;
    blk[i] ^= 1;
  }
}

TEST(Crc, EmptyPayloadRejected) { EXPECT_THROW(crc::attach(Bits{}), InvalidArgument); }
