#pragma once

// Gray-mapped square QAM (LTE labelling) with max-log soft demapping.

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "nrma/core.hpp"

namespace nrma::modem {

/// Unit-energy Gray constellation. Label bit 0 (first bit) drives the I sign,
/// bit 1 the Q sign, later bits the amplitudes; bit value 0 maps to +.
class Constellation {
 public:
  explicit Constellation(Modulation m) : mod_(m), bits_(nrma::bits_per_symbol(m)) {
    const int order = 1 << bits_;
    points_.resize(order);
    const double scale = m == Modulation::QPSK ? 1.0 / std::sqrt(2.0)
                         : m == Modulation::QAM16 ? 1.0 / std::sqrt(10.0)
                                                  : 1.0 / std::sqrt(42.0);
    for (int label = 0; label < order; ++label) {
      auto bit = [&](int i) { return (label >> (bits_ - 1 - i)) & 1; };
      auto sgn = [](int b) { return 1.0 - 2.0 * b; };
      double re = 0, im = 0;
      switch (m) {
        case Modulation::QPSK:
          re = sgn(bit(0));
          im = sgn(bit(1));
          break;
        case Modulation::QAM16:
          re = sgn(bit(0)) * (2.0 - sgn(bit(2)));
          im = sgn(bit(1)) * (2.0 - sgn(bit(3)));
          break;
        case Modulation::QAM64:
          re = sgn(bit(0)) * (4.0 - sgn(bit(2)) * (2.0 - sgn(bit(4))));
          im = sgn(bit(1)) * (4.0 - sgn(bit(3)) * (2.0 - sgn(bit(5))));
          break;
      }
      points_[label] = cplx(re, im) * scale;
    }
  }

  Modulation modulation() const { return mod_; }
  int bits_per_symbol() const { return bits_; }
  int order() const { return static_cast<int>(points_.size()); }
  std::span<const cplx> points() const { return points_; }
  cplx point(int label) const { return points_[label]; }

  /// Label bit i (MSB = first bit of the group).
  int label_bit(int label, int i) const { return (label >> (bits_ - 1 - i)) & 1; }

 private:
  Modulation mod_;
  int bits_;
  std::vector<cplx> points_;
};

inline const Constellation& constellation(Modulation m) {
  static const Constellation qpsk(Modulation::QPSK), q16(Modulation::QAM16), q64(Modulation::QAM64);
  switch (m) {
    case Modulation::QPSK: return qpsk;
    case Modulation::QAM16: return q16;
    default: return q64;
  }
}

inline std::vector<cplx> modulate(std::span<const std::uint8_t> bits, const Constellation& c) {
  const auto q = static_cast<std::size_t>(c.bits_per_symbol());
  if (bits.size() % q != 0) throw InvalidArgument("modulate: bit count not divisible by bits per symbol");
  std::vector<cplx> out(bits.size() / q);
  for (std::size_t s = 0; s < out.size(); ++s) {
    int label = 0;
    for (std::size_t i = 0; i < q; ++i) label = (label << 1) | (bits[s * q + i] & 1);
    out[s] = c.point(label);
  }
  return out;
}

/// Max-log LLR of every label bit of one received symbol y = h s + n.
/// Writes bits_per_symbol values to `out`.
inline void demap_symbol(cplx y, cplx h, double noise_var, const Constellation& c, double* out) {
  constexpr double kBig = 1e300;
  std::array<double, 6> d0, d1;
  d0.fill(kBig);
  d1.fill(kBig);
  const int q = c.bits_per_symbol();
  const double inv = 1.0 / noise_var;
  for (int label = 0; label < c.order(); ++label) {
    const double d = std::norm(y - h * c.point(label)) * inv;
    for (int i = 0; i < q; ++i) {
      auto& dst = c.label_bit(label, i) ? d1[i] : d0[i];
      if (d < dst) dst = d;
    }
  }
  for (int i = 0; i < q; ++i) out[i] = d1[i] - d0[i];
}

inline std::vector<double> demap_llr(std::span<const cplx> symbols, std::span<const cplx> gains, double noise_var,
                                     const Constellation& c) {
  if (!(noise_var > 0.0)) throw InvalidArgument("demap_llr: noise variance must be positive");
  if (gains.size() != symbols.size() && gains.size() != 1)
    throw InvalidArgument("demap_llr: need one channel gain per symbol (or a single common gain)");
  const int q = c.bits_per_symbol();
  std::vector<double> llr(symbols.size() * q);
  for (std::size_t s = 0; s < symbols.size(); ++s)
    demap_symbol(symbols[s], gains.size() == 1 ? gains[0] : gains[s], noise_var, c, &llr[s * q]);
  return llr;
}

}  // namespace nrma::modem
