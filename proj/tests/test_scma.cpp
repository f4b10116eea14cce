#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "nrma/scma.hpp"

using namespace nrma;

namespace {

Bits random_bits(RngStream& rng, std::size_t n) {
  Bits b(n);
  for (auto& x : b) x = rng.bit();
  return b;
}

// Exhaustive joint max-log detector for one spreading unit: per-user bit LLRs
// from the max over all M^K codeword hypotheses.
std::vector<std::vector<double>> brute_force(const scma::ScmaCodebook& cb, const ResourceGrid& y, const ChannelTensor& h,
                                             double nv) {
  const int k = cb.users(), m = cb.codewords_per_user(), n = cb.resources();
  std::vector<std::vector<double>> best(k, std::vector<double>(m, -1e300));
  int total = 1;
  for (int i = 0; i < k; ++i) total *= m;
  for (int hyp = 0; hyp < total; ++hyp) {
    std::vector<int> w(k);
    for (int i = 0, x = hyp; i < k; ++i, x /= m) w[i] = x % m;
    double metric = 0;
    for (int r = 0; r < n; ++r) {
      cplx s{};
      for (int u = 0; u < k; ++u) s += h(0, r, u) * cb.codeword(u, w[u], r);
      metric -= std::norm(y.at(0, r) - s) / nv;
    }
    for (int u = 0; u < k; ++u) best[u][w[u]] = std::max(best[u][w[u]], metric);
  }
  std::vector<std::vector<double>> llr(k, std::vector<double>(2));
  for (int u = 0; u < k; ++u) {
    llr[u][0] = std::max(best[u][0], best[u][1]) - std::max(best[u][2], best[u][3]);
    llr[u][1] = std::max(best[u][0], best[u][2]) - std::max(best[u][1], best[u][3]);
  }
  return llr;
}

struct Instance {
  ResourceGrid y;
  ChannelTensor h;
  std::vector<int> sent;
};

Instance random_unit(const scma::ScmaCodebook& cb, double nv, RngStream& rng) {
  Instance in{ResourceGrid(1, cb.resources()), ChannelTensor(1, cb.resources(), cb.users()), {}};
  in.h = draw_channel(ChannelModel::RAYLEIGH_BLOCK, cb.users(), cb.resources(), 1, rng);
  for (int u = 0; u < cb.users(); ++u) {
    const int w = static_cast<int>(rng.below(4));
    in.sent.push_back(w);
    for (int r : cb.user_resources(u)) in.y.at(0, r) += in.h(0, r, u) * cb.codeword(u, w, r);
  }
  for (auto& v : in.y.samples()) v += rng.complex_gaussian(nv);
  return in;
}

}  // namespace

TEST(ScmaCodebook, SixUsersUseTheSixDistinctPairs) {
  const auto cb = scma::build_codebook(4, 6, 4);
  std::set<std::vector<int>> cols;
  for (int u = 0; u < 6; ++u) {
    const auto r = cb.user_resources(u);
    EXPECT_EQ(r.size(), 2u);
    cols.insert(std::vector<int>(r.begin(), r.end()));
  }
  EXPECT_EQ(cols.size(), 6u);
  EXPECT_EQ(cb.degree(), 2);
}

TEST(ScmaCodebook, EnergyZerosAndDistinctCodewords) {
  for (int k : {4, 6, 8, 12}) {
    const auto cb = scma::build_codebook(4, k, 4);
    for (int u = 0; u < k; ++u) {
      double e = 0;
      for (int w = 0; w < 4; ++w)
        for (int r = 0; r < 4; ++r) {
          const cplx c = cb.codeword(u, w, r);
          e += std::norm(c);
          if (!cb.pattern()[r][u]) {
            EXPECT_EQ(c, cplx{});
          }
        }
      EXPECT_NEAR(e / 4.0, 1.0, 1e-12);
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          double d = 0;
          for (int r = 0; r < 4; ++r) d += std::norm(cb.codeword(u, a, r) - cb.codeword(u, b, r));
          EXPECT_GT(d, 1e-6);
        }
    }
  }
}

TEST(ScmaCodebook, TwelveUsersReuseEachPatternTwiceWithQuarterTurn) {
  const int k = 12;
  const auto cb = scma::build_codebook(4, k, 4);
  for (int u = 0; u < 6; ++u) {
    const int v = u + 6;
    const auto ru = cb.user_resources(u), rv = cb.user_resources(v);
    EXPECT_TRUE(std::equal(ru.begin(), ru.end(), rv.begin()));
    // Remove the per-user base rotation u*pi/(2K); what remains is the reuse rotation.
    const int r = ru[0];
    const cplx base = std::polar(1.0, (v - u) * std::numbers::pi / (2.0 * k));
    const cplx extra = cb.codeword(v, 0, r) / cb.codeword(u, 0, r) / base;
    EXPECT_NEAR(std::abs(extra - cplx(0.0, 1.0)), 0.0, 1e-12);
    // Paired users remain distinguishable: no shared codeword.
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) EXPECT_GT(std::abs(cb.codeword(u, a, r) - cb.codeword(v, b, r)), 1e-6);
  }
}

TEST(ScmaCodebook, Errors) {
  EXPECT_THROW(scma::build_codebook(4, 6, 8), Unsupported);
  EXPECT_THROW(scma::build_codebook(1, 6, 4), InvalidArgument);
}

TEST(ScmaCodebook, TextRoundTrip) {
  const auto cb = scma::build_codebook(4, 8, 4);
  std::stringstream ss;
  scma::write_codebook(ss, cb);
  const auto back = scma::read_codebook(ss);
  EXPECT_EQ(back.pattern(), cb.pattern());
  for (int u = 0; u < 8; ++u)
    for (int w = 0; w < 4; ++w)
      for (int r = 0; r < 4; ++r) EXPECT_NEAR(std::abs(back.codeword(u, w, r) - cb.codeword(u, w, r)), 0.0, 1e-8);
  std::stringstream bad("4 2 4 2\n1 0\n");
  EXPECT_THROW(scma::read_codebook(bad), ParseError);
}

TEST(ScmaEncode, SingleUserIdentityChannel) {
  const auto cb = scma::build_codebook(4, 1, 4);
  auto rng = rng_stream(1, 1);
  const std::vector<Bits> bits{random_bits(rng, 40)};
  const ChannelTensor h(20, 4, 1);
  const auto y = scma::scma_encode(bits, cb, h);
  for (int t = 0; t < 20; ++t) {
    const int w = scma::codeword_index(bits[0], t, 2);
    for (int r = 0; r < 4; ++r) EXPECT_EQ(y.at(t, r), cb.codeword(0, w, r));
  }
}

TEST(ScmaEncode, SuperpositionOfCodewordZero) {
  const auto cb = scma::build_codebook(4, 6, 4);
  const std::vector<Bits> bits(6, Bits(2, 0));
  const auto y = scma::scma_encode(bits, cb, ChannelTensor(1, 4, 6));
  for (int r = 0; r < 4; ++r) {
    cplx s{};
    for (int u = 0; u < 6; ++u) s += cb.codeword(u, 0, r);
    EXPECT_NEAR(std::abs(y.at(0, r) - s), 0.0, 1e-12);
  }
}

TEST(ScmaEncode, AveragePowerPerReIsKOverN) {
  const auto cb = scma::build_codebook(4, 6, 4);
  auto rng = rng_stream(1, 2);
  std::vector<Bits> bits;
  for (int u = 0; u < 6; ++u) bits.push_back(random_bits(rng, 20000));
  const auto y = scma::scma_encode(bits, cb, ChannelTensor(10000, 4, 6));
  double p = 0;
  for (auto v : y.samples()) p += std::norm(v);
  EXPECT_NEAR(p / static_cast<double>(y.size()), 1.5, 0.03);
}

TEST(ScmaEncode, MismatchedLengthsRejected) {
  const auto cb = scma::build_codebook(4, 2, 4);
  const std::vector<Bits> bits{Bits(4), Bits(6)};
  EXPECT_THROW(scma::scma_encode(bits, cb, ChannelTensor(3, 4, 2)), InvalidArgument);
}

TEST(Mpa, SingleUserEqualsDirectMl) {
  const auto cb = scma::build_codebook(4, 1, 4);
  auto rng = rng_stream(2, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_unit(cb, 0.5, rng);
    const auto ref = brute_force(cb, in.y, in.h, 0.5);
    for (int iters : {1, 3, 8}) {
      const auto llr = scma::mpa_detect(in.y, in.h, cb, 0.5, iters);
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(llr[0][b], ref[0][b], 1e-9);
    }
  }
}

TEST(Mpa, DisjointUsersDecouple) {
  const auto both = scma::codebook_from_patterns(4, {{0, 1}, {2, 3}});
  auto rng = rng_stream(2, 2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto in = random_unit(both, 0.3, rng);
    const auto joint = scma::mpa_detect(in.y, in.h, both, 0.3, 4);
    const auto ref = brute_force(both, in.y, in.h, 0.3);
    for (int u = 0; u < 2; ++u)
      for (int b = 0; b < 2; ++b) EXPECT_NEAR(joint[u][b], ref[u][b], 1e-9);
  }
}

// Max-log MPA is exact on cycle-free factor graphs.
TEST(Mpa, TreeGraphsMatchExhaustiveJointDetection) {
  const std::vector<std::vector<std::array<int, 2>>> graphs{
      {{0, 1}, {1, 2}},                  // two users sharing one RE
      {{0, 1}, {1, 2}, {2, 3}},          // chain
      {{0, 1}, {0, 2}, {0, 3}},          // star on RE 0
  };
  auto rng = rng_stream(2, 3);
  for (const auto& g : graphs) {
    const int n = 1 + std::max_element(g.begin(), g.end(), [](auto& a, auto& b) { return a[1] < b[1]; })->at(1);
    const auto cb = scma::codebook_from_patterns(n, g);
    for (int trial = 0; trial < 100; ++trial) {
      const auto in = random_unit(cb, 0.5, rng);
      const auto ref = brute_force(cb, in.y, in.h, 0.5);
      const auto llr = scma::mpa_detect(in.y, in.h, cb, 0.5, 8);
      for (int u = 0; u < cb.users(); ++u)
        for (int b = 0; b < 2; ++b) ASSERT_NEAR(llr[u][b], ref[u][b], 1e-9) << "user " << u << " trial " << trial;
    }
  }
}

// Two users on the same two REs form a cycle; max-log MPA is then approximate,
// but hard decisions agree with the joint detector at moderate noise.
TEST(Mpa, TwoUsersSharingBothResDecisionsAgree) {
  const auto cb = scma::codebook_from_patterns(2, {{0, 1}, {0, 1}});
  auto rng = rng_stream(2, 4);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = random_unit(cb, 0.05, rng);
    const auto ref = brute_force(cb, in.y, in.h, 0.05);
    const auto llr = scma::mpa_detect(in.y, in.h, cb, 0.05, 2);
    for (int u = 0; u < 2; ++u)
      for (int b = 0; b < 2; ++b, ++total) agree += (llr[u][b] < 0) == (ref[u][b] < 0);
  }
  EXPECT_GE(agree, static_cast<int>(0.98 * total));
}

TEST(Mpa, MessagesStayFiniteOverSnrRange) {
  const auto cb = scma::build_codebook(4, 6, 4);
  auto rng = rng_stream(2, 5);
  for (double snr : {-10.0, 0.0, 10.0, 30.0}) {
    const int units = 2500;
    const auto h = draw_channel(ChannelModel::RAYLEIGH_BLOCK, 6, 4, units, rng);
    std::vector<Bits> bits;
    for (int u = 0; u < 6; ++u) bits.push_back(random_bits(rng, 2 * units));
    auto y = scma::scma_encode(bits, cb, h);
    const double nv = add_noise(y, snr, rng);
    const auto llr = scma::mpa_detect(y, h, cb, nv, 8);
    for (const auto& l : llr)
      for (double v : l) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Mpa, PermutationEquivariance) {
  // Same codewords, users listed in reverse order.
  const auto cb = scma::build_codebook(4, 6, 4);
  const int k = 6, n = 4;
  std::vector<std::vector<std::uint8_t>> f(n, std::vector<std::uint8_t>(k));
  std::vector<cplx> words(static_cast<std::size_t>(k) * 4 * n);
  for (int u = 0; u < k; ++u) {
    const int src = k - 1 - u;
    for (int r = 0; r < n; ++r) f[r][u] = cb.pattern()[r][src];
    for (int w = 0; w < 4; ++w)
      for (int r = 0; r < n; ++r) words[(static_cast<std::size_t>(u) * 4 + w) * n + r] = cb.codeword(src, w, r);
  }
  const scma::ScmaCodebook perm(n, k, 4, f, words);
  auto rng = rng_stream(2, 6);
  const auto in = random_unit(cb, 0.4, rng);
  ChannelTensor hp(1, n, k);
  for (int u = 0; u < k; ++u)
    for (int r = 0; r < n; ++r) hp(0, r, u) = in.h(0, r, k - 1 - u);
  const auto a = scma::mpa_detect(in.y, in.h, cb, 0.4, 8);
  const auto b = scma::mpa_detect(in.y, hp, perm, 0.4, 8);
  for (int u = 0; u < k; ++u)
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(a[u][i], b[k - 1 - u][i], 1e-9);
}

TEST(Mpa, Errors) {
  const auto cb = scma::build_codebook(4, 6, 4);
  const ResourceGrid y(1, 4);
  const ChannelTensor h(1, 4, 6);
  EXPECT_THROW(scma::mpa_detect(y, h, cb, 0.0, 8), InvalidArgument);
  EXPECT_THROW(scma::mpa_detect(y, h, cb, 1.0, 0), InvalidArgument);
}
