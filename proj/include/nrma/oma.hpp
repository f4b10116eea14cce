#pragma once

// Orthogonal baseline: each user owns its resource elements exclusively and is
// SE-matched to the NR-MA operating point it is compared against.

#include <cmath>
#include <span>

#include "nrma/channel.hpp"
#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/fec.hpp"
#include "nrma/modem.hpp"

namespace nrma::oma {

inline constexpr double kMaxCodeRate = 0.93;

struct OmaConfig {
  Modulation modulation = Modulation::QPSK;
  double code_rate = 0.5;
  int res_per_user = 0;  // filled in once the grid geometry is known

  double spectral_efficiency() const { return bits_per_symbol(modulation) * code_rate; }
};

/// Per-user SE equality of * 2 * cr_nr = log2(M) * cr_oma. The OMA user gets
/// 1/of of the NR-MA user's REs, so it must carry of * 2 coded-symbol bits per
/// RE: the smallest order with log2(M) >= of * 2 is chosen, moving up while the
/// resulting code rate exceeds 0.93.
inline OmaConfig oma_match(const SchemeConfig& nr) {
  const double of = overloading_factor(nr.num_users, nr.spreading_factor);
  const double se = of * 2.0 * nr.code_rate;
  for (auto m : {Modulation::QPSK, Modulation::QAM16, Modulation::QAM64}) {
    const int q = bits_per_symbol(m);
    if (q + 1e-9 < of * 2.0 && m != Modulation::QAM64) continue;
    const double cr = se / q;
    if (cr <= kMaxCodeRate + 1e-12) return {m, cr, 0};
  }
  throw Infeasible("oma_match: required spectral efficiency exceeds 64QAM at rate 0.93");
}

/// Single-user chain on `res` REs with per-RE gains: encode, modulate, fade,
/// add noise, demap, decode. Noise samples are taken from `noise` in order.
/// Returns true when the CRC passes.
template <typename NoiseFn>
bool single_user_link(std::span<const std::uint8_t> payload_with_crc, const fec::ConvCode& code, Modulation mod,
                      std::span<const cplx> gains, double noise_var, NoiseFn&& noise) {
  const auto& c = modem::constellation(mod);
  const auto symbols = modem::modulate(code.encode(payload_with_crc), c);
  if (gains.size() != symbols.size()) throw InvalidArgument("single_user_link: one gain per symbol required");
  std::vector<cplx> y(symbols.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = gains[i] * symbols[i] + noise(i);
  const auto llr = modem::demap_llr(y, gains, noise_var, c);
  return crc::check(code.decode(llr).bits);
}

}  // namespace nrma::oma
