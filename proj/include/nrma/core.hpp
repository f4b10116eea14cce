#pragma once

// Shared domain types for the multiple-access simulation framework.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace nrma {

using cplx = std::complex<double>;
using Bits = std::vector<std::uint8_t>;

// Error kinds. Every failure surfaced by the library derives from std::runtime_error
// (or std::invalid_argument) so callers can catch coarsely.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct UnsupportedRate : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Unsupported : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct Infeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SchemeKind { SCMA, MUSA, IDMA, OMA };
inline constexpr SchemeKind kAllSchemes[] = {SchemeKind::SCMA, SchemeKind::MUSA,
                                             SchemeKind::IDMA, SchemeKind::OMA};
inline constexpr SchemeKind kNrmaSchemes[] = {SchemeKind::SCMA, SchemeKind::MUSA,
                                              SchemeKind::IDMA};

enum class Modulation { QPSK, QAM16, QAM64 };

enum class ChannelModel { AWGN, RAYLEIGH_BLOCK };

inline std::string_view to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::SCMA: return "SCMA";
    case SchemeKind::MUSA: return "MUSA";
    case SchemeKind::IDMA: return "IDMA";
    case SchemeKind::OMA: return "OMA";
  }
  return "?";
}

inline SchemeKind parse_scheme(std::string_view s) {
  for (auto k : kAllSchemes)
    if (to_string(k) == s) return k;
  throw InvalidArgument("unknown scheme '" + std::string(s) + "'");
}

inline std::string_view to_string(Modulation m) {
  switch (m) {
    case Modulation::QPSK: return "QPSK";
    case Modulation::QAM16: return "QAM16";
    case Modulation::QAM64: return "QAM64";
  }
  return "?";
}

inline Modulation parse_modulation(std::string_view s) {
  if (s == "QPSK") return Modulation::QPSK;
  if (s == "QAM16" || s == "16QAM") return Modulation::QAM16;
  if (s == "QAM64" || s == "64QAM") return Modulation::QAM64;
  throw InvalidArgument("unknown modulation '" + std::string(s) + "'");
}

inline std::string_view to_string(ChannelModel c) {
  return c == ChannelModel::AWGN ? "AWGN" : "RAYLEIGH_BLOCK";
}

inline ChannelModel parse_channel(std::string_view s) {
  if (s == "AWGN" || s == "awgn") return ChannelModel::AWGN;
  if (s == "RAYLEIGH_BLOCK" || s == "rayleigh" || s == "RAYLEIGH") return ChannelModel::RAYLEIGH_BLOCK;
  throw InvalidArgument("unknown channel model '" + std::string(s) + "'");
}

constexpr int bits_per_symbol(Modulation m) {
  switch (m) {
    case Modulation::QPSK: return 2;
    case Modulation::QAM16: return 4;
    case Modulation::QAM64: return 6;
  }
  return 0;
}

/// Ratio of superposed user signals to orthogonal resource elements.
inline double overloading_factor(int num_users, int spreading_factor) {
  if (spreading_factor <= 0) throw InvalidArgument("spreading_factor must be >= 1");
  if (num_users <= 0) throw InvalidArgument("num_users must be >= 1");
  return static_cast<double>(num_users) / spreading_factor;
}

/// Users needed to realise overloading factor `of` on `spreading_factor` REs.
inline int users_for_overloading(double of, int spreading_factor) {
  const double k = of * spreading_factor;
  const int rounded = static_cast<int>(std::lround(k));
  if (rounded < 1 || std::abs(k - rounded) > 1e-9)
    throw InvalidArgument("overloading factor " + std::to_string(of) +
                          " is not realisable with spreading factor " +
                          std::to_string(spreading_factor));
  return rounded;
}

/// Number of coded bits for `k` payload bits at `rate`, i.e. ceil(k / rate).
/// Rates such as 0.2 are not exact in binary, so a small slack absorbs the
/// representation error before rounding up.
inline std::size_t coded_length_for_rate(std::size_t k, double rate) {
  if (!(rate > 0.0) || rate > 1.0) throw InvalidArgument("code rate must lie in (0, 1]");
  return static_cast<std::size_t>(std::ceil(static_cast<double>(k) / rate - 1e-9));
}

/// One link-level experiment point.
struct SchemeConfig {
  SchemeKind scheme = SchemeKind::SCMA;
  int spreading_factor = 4;  // N
  int num_users = 6;         // K
  Modulation modulation = Modulation::QPSK;
  double code_rate = 0.2;
  int info_block_bits = 128;  // transport block, CRC excluded
  double snr_db = 0.0;
  int mpa_iterations = 8;
  int esepic_iterations = 6;
  ChannelModel channel = ChannelModel::RAYLEIGH_BLOCK;
  std::uint64_t seed = 1;

  double overloading() const { return overloading_factor(num_users, spreading_factor); }

  void validate() const {
    if (num_users < 1) throw InvalidArgument("num_users must be >= 1");
    if (spreading_factor < 1) throw InvalidArgument("spreading_factor must be >= 1");
    if (!(code_rate > 0.0) || code_rate > 1.0) throw InvalidArgument("code_rate must lie in (0, 1]");
    if (info_block_bits < 1) throw InvalidArgument("info_block_bits must be >= 1");
    if (mpa_iterations < 1) throw InvalidArgument("mpa_iterations must be >= 1");
    if (esepic_iterations < 1) throw InvalidArgument("esepic_iterations must be >= 1");
    // An OMA config names the NR-MA point it is matched against, so any K is legal.
    if (scheme != SchemeKind::OMA && num_users <= spreading_factor && num_users > 1) {
      // K = 1 is a legal single-user sanity configuration.
      throw InvalidArgument("NR-MA schemes require overloading factor > 1");
    }
  }
};

/// Noise variance per complex resource element for a per-user SNR in dB.
inline double noise_variance(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

}  // namespace nrma
