#pragma once

// Sequence-based multiple access: short complex spreading sequences with
// entries from {-1,0,1} + j{-1,0,1}, and a CRC-gated codeword-level MMSE-SIC
// receiver ordered by post-MMSE SINR.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nrma/channel.hpp"
#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/fec.hpp"
#include "nrma/modem.hpp"
#include "nrma/rng.hpp"

namespace nrma::musa {

using Sequence = std::vector<cplx>;

struct SequencePool {
  int length = 0;
  std::vector<Sequence> sequences;
};

namespace detail {

using GaussInt = std::pair<int, int>;

// Integer key identifying the complex line through v (v != 0): scale so the
// first non-zero entry becomes real and positive, with rational parts cleared.
inline std::vector<GaussInt> line_key(const std::vector<GaussInt>& v) {
  std::size_t i0 = 0;
  while (v[i0].first == 0 && v[i0].second == 0) ++i0;
  const int a = v[i0].first, b = v[i0].second;  // multiply by conj(v0), then by 2/|v0|^2
  const int n0 = a * a + b * b;
  std::vector<GaussInt> key;
  key.reserve(v.size());
  for (const auto& [re, im] : v) {
    const int kr = re * a + im * b;
    const int ki = im * a - re * b;
    key.emplace_back(2 * kr / n0, 2 * ki / n0);
  }
  return key;
}

inline std::vector<GaussInt> candidate(std::uint64_t index, int length) {
  std::vector<GaussInt> v(length);
  for (int l = 0; l < length; ++l) {
    const int d = static_cast<int>(index % 9);
    index /= 9;
    v[l] = {d % 3 - 1, d / 3 - 1};
  }
  return v;
}

inline std::uint64_t candidate_count(int length) {
  std::uint64_t c = 1;
  for (int l = 0; l < length; ++l) c *= 9;
  return c;
}

inline bool is_zero(const std::vector<GaussInt>& v) {
  return std::all_of(v.begin(), v.end(), [](const GaussInt& g) { return g.first == 0 && g.second == 0; });
}

}  // namespace detail

/// Number of pairwise non-collinear candidates (exact for L <= 4, 0 = "not enumerated").
inline std::uint64_t distinct_lines(int length) {
  if (length > 4) return 0;
  std::set<std::vector<detail::GaussInt>> lines;
  const auto total = detail::candidate_count(length);
  for (std::uint64_t i = 0; i < total; ++i) {
    const auto v = detail::candidate(i, length);
    if (!detail::is_zero(v)) lines.insert(detail::line_key(v));
  }
  return lines.size();
}

/// Rejection-sample `count` pairwise non-collinear unit-norm sequences.
inline SequencePool gen_sequences(int length, int count, std::uint64_t seed) {
  if (length < 1 || count < 1) throw InvalidArgument("gen_sequences: length and count must be >= 1");
  if (length <= 4 && static_cast<std::uint64_t>(count) > distinct_lines(length))
    throw InvalidArgument("gen_sequences: more sequences requested than non-collinear candidates exist");

  auto rng = rng_stream(seed, stream_id(0, StreamPurpose::Sequences));
  const auto total = detail::candidate_count(length);
  std::set<std::vector<detail::GaussInt>> used;
  SequencePool pool{length, {}};
  constexpr int kMaxAttempts = 1'000'000;
  for (int attempt = 0; static_cast<int>(pool.sequences.size()) < count; ++attempt) {
    if (attempt >= kMaxAttempts) throw InvalidArgument("gen_sequences: could not find enough non-collinear sequences");
    const auto v = detail::candidate(rng.below(total), length);
    if (detail::is_zero(v) || !used.insert(detail::line_key(v)).second) continue;
    double energy = 0;
    for (const auto& [re, im] : v) energy += re * re + im * im;
    const double scale = 1.0 / std::sqrt(energy);
    Sequence s(length);
    for (int l = 0; l < length; ++l) s[l] = cplx(v[l].first, v[l].second) * scale;
    pool.sequences.push_back(std::move(s));
  }
  return pool;
}

/// Each symbol becomes L chips s * seq.
inline std::vector<cplx> musa_spread(std::span<const cplx> symbols, std::span<const cplx> seq) {
  std::vector<cplx> chips(symbols.size() * seq.size());
  for (std::size_t t = 0; t < symbols.size(); ++t)
    for (std::size_t l = 0; l < seq.size(); ++l) chips[t * seq.size() + l] = symbols[t] * seq[l];
  return chips;
}

/// Matched-filter despreading with a unit-norm sequence.
inline std::vector<cplx> musa_despread(std::span<const cplx> chips, std::span<const cplx> seq) {
  const std::size_t l = seq.size();
  std::vector<cplx> out(chips.size() / l);
  for (std::size_t t = 0; t < out.size(); ++t) {
    cplx acc{};
    for (std::size_t i = 0; i < l; ++i) acc += std::conj(seq[i]) * chips[t * l + i];
    out[t] = acc;
  }
  return out;
}

/// W = (A^H A + sigma^2 I)^{-1} A^H.
inline Eigen::MatrixXcd mmse_filter(const Eigen::MatrixXcd& a, double noise_var) {
  Eigen::MatrixXcd gram = a.adjoint() * a;
  gram.diagonal().array() += noise_var;
  return gram.ldlt().solve(a.adjoint());
}

/// Adds user `k`'s received chips (channel applied) to the grid, scaled by `sign`.
inline void accumulate_user(ResourceGrid& grid, std::span<const cplx> symbols, const Sequence& seq, const ChannelTensor& h,
                            int user, double sign = 1.0) {
  const int l = static_cast<int>(seq.size());
  for (int t = 0; t < grid.units(); ++t)
    for (int n = 0; n < l; ++n) grid.at(t, n) += sign * h(t, n, user) * seq[n] * symbols[t];
}

struct UserDecode {
  Bits bits;            // decoded payload including CRC
  bool crc_pass = false;
  int order = -1;       // position in the SIC detection order
};

/// Codeword-level MMSE-SIC. Users are detected in decreasing post-MMSE SINR
/// (mean over units of log2(1 + SINR), recomputed each stage); CRC-passing users
/// are re-encoded and cancelled. Failing users are not attempted again and are not
/// cancelled, so they stay in the interference covariance.
inline std::vector<UserDecode> mmse_sic_detect(const ResourceGrid& received, std::span<const Sequence> sequences,
                                               const ChannelTensor& h, double noise_var, const fec::ConvCode& code) {
  if (!(noise_var > 0.0)) throw InvalidArgument("mmse_sic_detect: noise variance must be positive");
  const int k = static_cast<int>(sequences.size());
  const int l = received.elements();
  const int units = received.units();
  if (code.coded_bits() != static_cast<std::size_t>(2 * units))
    throw InvalidArgument("mmse_sic_detect: code length does not match the grid (QPSK, one symbol per unit)");
  const auto& qpsk = modem::constellation(Modulation::QPSK);

  ResourceGrid y = received;
  // `present`: users still in the residual (pending or failed), i.e. the columns
  // of A. `pending`: users not yet attempted.
  std::vector<int> present(k), pending(k);
  for (int i = 0; i < k; ++i) present[i] = pending[i] = i;
  std::vector<UserDecode> out(k);

  Eigen::MatrixXcd a(l, k);
  Eigen::MatrixXcd r(l, l);
  Eigen::VectorXcd yv(l), av(l);
  std::vector<cplx> est(units);
  std::vector<double> eff_var(units);
  std::vector<double> llr(2 * static_cast<std::size_t>(units));
  std::vector<Eigen::MatrixXcd> rinv(units);

  for (int stage = 0; stage < k; ++stage) {
    const int cols = static_cast<int>(present.size());
    // Regularised inverse per unit and mean post-MMSE capacity per pending user.
    std::vector<double> score(pending.size(), 0.0);
    a.resize(l, cols);
    for (int t = 0; t < units; ++t) {
      for (int j = 0; j < cols; ++j)
        for (int n = 0; n < l; ++n) a(n, j) = h(t, n, present[j]) * sequences[present[j]][n];
      r = a * a.adjoint();
      r.diagonal().array() += noise_var;
      rinv[t] = r.inverse();
      for (std::size_t j = 0; j < pending.size(); ++j) {
        for (int n = 0; n < l; ++n) av(n) = h(t, n, pending[j]) * sequences[pending[j]][n];
        const double beta = std::min(av.dot(rinv[t] * av).real(), 1.0 - 1e-12);
        score[j] += std::log2(1.0 + beta / (1.0 - beta));
      }
    }
    const auto pick = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
    const int user = pending[pick];

    for (int t = 0; t < units; ++t) {
      for (int n = 0; n < l; ++n) {
        av(n) = h(t, n, user) * sequences[user][n];
        yv(n) = y.at(t, n);
      }
      const Eigen::VectorXcd w = rinv[t] * av;  // MMSE weights (up to conjugation)
      const double beta = std::clamp(av.dot(w).real(), 1e-12, 1.0 - 1e-12);
      est[t] = w.dot(yv) / beta;  // w^H y, unbiased
      eff_var[t] = (1.0 - beta) / beta;
    }
    for (int t = 0; t < units; ++t) modem::demap_symbol(est[t], {1.0, 0.0}, eff_var[t], qpsk, &llr[2 * t]);
    auto dec = code.decode(llr);
    out[user].crc_pass = crc::check(dec.bits);
    out[user].bits = std::move(dec.bits);
    out[user].order = stage;
    if (out[user].crc_pass) {
      const auto symbols = modem::modulate(code.encode(out[user].bits), qpsk);
      accumulate_user(y, symbols, sequences[user], h, user, -1.0);
      present.erase(std::find(present.begin(), present.end(), user));
    }
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return out;
}

/// One sequence per line as L "re im" pairs.
inline void write_sequences(std::ostream& os, const SequencePool& pool) {
  const auto old = os.precision(9);
  for (const auto& s : pool.sequences) {
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i].real() << ' ' << s[i].imag();
    os << '\n';
  }
  os.precision(old);
}

inline SequencePool read_sequences(std::istream& is) {
  SequencePool pool;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Sequence s;
    double re, im;
    while (ls >> re >> im) s.emplace_back(re, im);
    if (!ls.eof() || s.empty()) throw ParseError("sequences: malformed line " + std::to_string(lineno));
    if (pool.length == 0) pool.length = static_cast<int>(s.size());
    if (static_cast<int>(s.size()) != pool.length) throw ParseError("sequences: inconsistent length on line " + std::to_string(lineno));
    pool.sequences.push_back(std::move(s));
  }
  return pool;
}

}  // namespace nrma::musa
