#pragma once

// Interleaver-based multiple access: low-rate FEC, repetition, user-specific
// bit interleaving, and the iterative ESE-PIC receiver (chip-by-chip Gaussian
// interference estimation with soft cancellation).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "nrma/channel.hpp"
#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/fec.hpp"
#include "nrma/rng.hpp"

namespace nrma::idma {

inline constexpr int kDefaultIterations = 6;
inline constexpr double kVarianceFloor = 1e-12;

/// out[j] = in[perm[j]].
using Permutation = std::vector<std::uint32_t>;

/// Fisher-Yates shuffle driven by rng_stream(seed, user).
inline Permutation make_interleaver(std::size_t length, std::uint64_t seed, int user) {
  Permutation p(length);
  for (std::size_t i = 0; i < length; ++i) p[i] = static_cast<std::uint32_t>(i);
  auto rng = rng_stream(seed, stream_id(static_cast<std::uint64_t>(user), StreamPurpose::Interleaver));
  for (std::size_t i = length; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

inline std::vector<Permutation> make_interleavers(int users, std::size_t length, std::uint64_t seed) {
  std::vector<Permutation> set;
  set.reserve(users);
  for (int k = 0; k < users; ++k) set.push_back(make_interleaver(length, seed, k));
  return set;
}

template <typename T>
std::vector<T> interleave(std::span<const T> in, const Permutation& p) {
  std::vector<T> out(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[p[j]];
  return out;
}

template <typename T>
std::vector<T> deinterleave(std::span<const T> in, const Permutation& p) {
  std::vector<T> out(in.size());
  for (std::size_t j = 0; j < in.size(); ++j) out[p[j]] = in[j];
  return out;
}

/// Chip amplitude per rail so that a QPSK chip carries energy 1 / repeat.
inline double chip_amplitude(int repeat) { return 1.0 / std::sqrt(2.0 * repeat); }

/// FEC -> repetition -> interleaving -> QPSK chips (I rail from even chip bits).
inline std::vector<cplx> idma_encode(std::span<const std::uint8_t> payload, const fec::ConvCode& code, int repeat,
                                     const Permutation& perm) {
  if (repeat < 1) throw InvalidArgument("idma_encode: repetition factor must be >= 1");
  const Bits coded = code.encode(payload);
  const std::size_t chip_bits = coded.size() * repeat;
  if (perm.size() != chip_bits) throw InvalidArgument("idma_encode: interleaver length does not match the chip budget");
  if (chip_bits % 2 != 0) throw InvalidArgument("idma_encode: chip stream must fill whole QPSK chips");
  Bits repeated(chip_bits);
  for (std::size_t i = 0; i < coded.size(); ++i)
    for (int r = 0; r < repeat; ++r) repeated[i * repeat + r] = coded[i];
  const Bits mixed = interleave<std::uint8_t>(repeated, perm);
  const double amp = chip_amplitude(repeat);
  std::vector<cplx> chips(chip_bits / 2);
  for (std::size_t c = 0; c < chips.size(); ++c)
    chips[c] = amp * cplx(1.0 - 2.0 * mixed[2 * c], 1.0 - 2.0 * mixed[2 * c + 1]);
  return chips;
}

/// Soft chip statistics for one user: means of the I and Q rails (variances are 1 - mean^2).
struct SoftChipState {
  std::vector<double> mean_i, mean_q;

  explicit SoftChipState(std::size_t chips = 0) : mean_i(chips, 0.0), mean_q(chips, 0.0) {}

  /// From per-chip-bit a-priori LLRs in chip-bit order (I, Q, I, Q, ...).
  void update(std::span<const double> prior) {
    for (std::size_t c = 0; c < mean_i.size(); ++c) {
      mean_i[c] = std::tanh(prior[2 * c] / 2.0);
      mean_q[c] = std::tanh(prior[2 * c + 1] / 2.0);
    }
  }
};

/// Elementary signal estimator. `gains[k][c]` is user k's complex amplitude on
/// chip c (channel times chip amplitude). Writes extrinsic chip-bit LLRs in
/// chip-bit order to `out[k]`. Each user's own chip is seen in a frame rotated by
/// its channel phase; other users' rails are treated as Gaussian with the exact
/// per-rail mean and variance. For real gains this reduces to
/// e = 2 h (r - m + h E) / (v - h^2 Var).
inline void ese_estimate(std::span<const cplx> received, const std::vector<std::vector<cplx>>& gains,
                         const std::vector<SoftChipState>& state, double noise_var, std::vector<std::vector<double>>& out) {
  const std::size_t users = gains.size();
  const std::size_t chips = received.size();
  for (std::size_t k = 0; k < users; ++k) out[k].resize(2 * chips);
  for (std::size_t c = 0; c < chips; ++c) {
    cplx mean{};
    double p = 0.0;
    cplx q{};
    for (std::size_t k = 0; k < users; ++k) {
      const cplx g = gains[k][c];
      const double ei = state[k].mean_i[c], eq = state[k].mean_q[c];
      const double vi = 1.0 - ei * ei, vq = 1.0 - eq * eq;
      mean += g * cplx(ei, eq);
      p += std::norm(g) * (vi + vq);
      q += g * g * (vi - vq);
    }
    const cplx resid = received[c] - mean;
    for (std::size_t k = 0; k < users; ++k) {
      const cplx g = gains[k][c];
      const double mag = std::abs(g);
      if (mag < 1e-300) {
        out[k][2 * c] = out[k][2 * c + 1] = 0.0;
        continue;
      }
      const cplx u = g / mag;
      const double ei = state[k].mean_i[c], eq = state[k].mean_q[c];
      const double vi = 1.0 - ei * ei, vq = 1.0 - eq * eq;
      const cplx z = std::conj(u) * resid;
      const double cross = (std::conj(u) * std::conj(u) * q).real();
      const double var_i = std::max(0.5 * (p + cross) + 0.5 * noise_var - mag * mag * vi, kVarianceFloor);
      const double var_q = std::max(0.5 * (p - cross) + 0.5 * noise_var - mag * mag * vq, kVarianceFloor);
      out[k][2 * c] = 2.0 * mag * (z.real() + mag * ei) / var_i;
      out[k][2 * c + 1] = 2.0 * mag * (z.imag() + mag * eq) / var_q;
    }
  }
}

struct DetectResult {
  std::vector<Bits> bits;                      // decoded payload (with CRC) per user
  std::vector<bool> crc_pass;
  std::vector<std::vector<double>> payload_llr;
  std::vector<std::vector<double>> mean_abs_trace;  // per user, median |E[x]| after each iteration
};

/// ESE-PIC turbo receiver over `iterations` outer rounds.
inline DetectResult ese_pic_detect(std::span<const cplx> received, const std::vector<std::vector<cplx>>& gains,
                                   double noise_var, int iterations, const fec::ConvCode& code, int repeat,
                                   const std::vector<Permutation>& perms) {
  if (iterations < 1) throw InvalidArgument("ese_pic_detect: iterations must be >= 1");
  if (!(noise_var > 0.0)) throw InvalidArgument("ese_pic_detect: noise variance must be positive");
  const std::size_t users = gains.size();
  const std::size_t chips = received.size();
  const std::size_t coded = code.coded_bits();
  if (coded * repeat != 2 * chips) throw InvalidArgument("ese_pic_detect: chip budget mismatch");

  std::vector<SoftChipState> state(users, SoftChipState(chips));
  std::vector<std::vector<double>> ese(users);
  DetectResult res;
  res.bits.resize(users);
  res.crc_pass.assign(users, false);
  res.payload_llr.resize(users);
  res.mean_abs_trace.assign(users, {});
  std::vector<double> coded_llr(coded);
  std::vector<double> prior(2 * chips);
  std::vector<double> mags(2 * chips);

  for (int it = 0; it < iterations; ++it) {
    ese_estimate(received, gains, state, noise_var, ese);
    for (std::size_t k = 0; k < users; ++k) {
      const auto stream = deinterleave<double>(ese[k], perms[k]);
      for (std::size_t i = 0; i < coded; ++i) {
        double acc = 0.0;
        for (int r = 0; r < repeat; ++r) acc += stream[i * repeat + r];
        coded_llr[i] = acc;
      }
      auto dec = code.decode(coded_llr);
      if (it + 1 == iterations) {
        res.crc_pass[k] = crc::check(dec.bits);
        res.bits[k] = std::move(dec.bits);
        res.payload_llr[k] = std::move(dec.payload_llr);
      }
      // Decoder extrinsic, re-repeated onto every copy of the coded bit.
      std::vector<double> copies(stream.size());
      for (std::size_t i = 0; i < coded; ++i)
        for (int r = 0; r < repeat; ++r) copies[i * repeat + r] = dec.extrinsic[i];
      prior = interleave<double>(copies, perms[k]);
      state[k].update(prior);
      for (std::size_t c = 0; c < chips; ++c) {
        mags[2 * c] = std::abs(state[k].mean_i[c]);
        mags[2 * c + 1] = std::abs(state[k].mean_q[c]);
      }
      auto mid = mags.begin() + mags.size() / 2;
      std::nth_element(mags.begin(), mid, mags.end());
      res.mean_abs_trace[k].push_back(*mid);
    }
  }
  return res;
}

}  // namespace nrma::idma
