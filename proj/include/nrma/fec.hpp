#pragma once

// Rate-1/3, constraint-length-7 convolutional code (generators 133/171/165
// octal, zero-tail) with cyclic-repetition / even-puncturing rate matching
// and a max-log BCJR soft-in/soft-out decoder.
//
// LLR convention everywhere: positive means bit 0 is more likely.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "nrma/core.hpp"

namespace nrma::fec {

inline constexpr int kMemory = 6;
inline constexpr int kStates = 1 << kMemory;
inline constexpr int kOutputs = 3;
inline constexpr std::array<unsigned, kOutputs> kGenerators{0133, 0171, 0165};
inline constexpr std::size_t kMinPayload = 8;

namespace detail {

struct Trellis {
  std::array<std::array<std::uint8_t, 2>, kStates> next{};
  // Output pattern: bit j of the value is generator j's output.
  std::array<std::array<std::uint8_t, 2>, kStates> out{};

  constexpr Trellis() {
    for (int s = 0; s < kStates; ++s) {
      for (int u = 0; u < 2; ++u) {
        const unsigned reg = (static_cast<unsigned>(u) << kMemory) | static_cast<unsigned>(s);
        unsigned pattern = 0;
        for (int j = 0; j < kOutputs; ++j) {
          unsigned v = reg & kGenerators[j], parity = 0;
          while (v) {
            parity ^= v & 1u;
            v >>= 1;
          }
          pattern |= parity << j;
        }
        next[s][u] = static_cast<std::uint8_t>(reg >> 1);
        out[s][u] = static_cast<std::uint8_t>(pattern);
      }
    }
  }
};

inline constexpr Trellis kTrellis{};
inline constexpr double kNegInf = -1e300;

}  // namespace detail

/// Mapping from transmitted positions to mother-code positions.
/// Shorter targets puncture evenly; longer ones repeat the mother code cyclically.
class RateMatchPlan {
 public:
  RateMatchPlan() = default;
  RateMatchPlan(std::size_t mother_length, std::size_t out_length) : mother_(mother_length) {
    positions_.resize(out_length);
    for (std::size_t i = 0; i < out_length; ++i) {
      positions_[i] = out_length <= mother_length
                          ? static_cast<std::uint32_t>((i * mother_length) / out_length)
                          : static_cast<std::uint32_t>(i % mother_length);
    }
  }

  std::size_t mother_length() const { return mother_; }
  std::size_t out_length() const { return positions_.size(); }
  std::span<const std::uint32_t> positions() const { return positions_; }

  Bits apply(std::span<const std::uint8_t> mother) const {
    Bits out(positions_.size());
    for (std::size_t i = 0; i < positions_.size(); ++i) out[i] = mother[positions_[i]];
    return out;
  }

  /// Back to mother positions: repeated LLRs are summed, punctured ones stay 0.
  std::vector<double> recover(std::span<const double> llr) const {
    std::vector<double> mother(mother_, 0.0);
    for (std::size_t i = 0; i < positions_.size(); ++i) mother[positions_[i]] += llr[i];
    return mother;
  }

 private:
  std::size_t mother_ = 0;
  std::vector<std::uint32_t> positions_;
};

/// Unpunctured rate-1/3 zero-tail encoding: 3 * (k + 6) bits, step-interleaved.
inline Bits encode_mother(std::span<const std::uint8_t> payload) {
  Bits out;
  out.reserve(kOutputs * (payload.size() + kMemory));
  unsigned state = 0;
  auto step = [&](unsigned u) {
    const auto pattern = detail::kTrellis.out[state][u];
    for (int j = 0; j < kOutputs; ++j) out.push_back(static_cast<std::uint8_t>((pattern >> j) & 1u));
    state = detail::kTrellis.next[state][u];
  };
  for (auto b : payload) step(b & 1u);
  for (int i = 0; i < kMemory; ++i) step(0);
  return out;
}

struct SisoOutput {
  Bits bits;                         // hard decisions on the payload
  std::vector<double> extrinsic;     // per transmitted coded bit, channel input excluded
  std::vector<double> payload_llr;   // posterior on payload bits (a-priori included)
};

/// A (payload length, coded length) instance of the code with its rate-match plan.
class ConvCode {
 public:
  ConvCode(std::size_t payload_bits, std::size_t coded_bits)
      : k_(payload_bits), plan_(kOutputs * (payload_bits + kMemory), coded_bits) {
    if (payload_bits < kMinPayload) throw InvalidArgument("payload must hold at least 8 bits");
    if (coded_bits < payload_bits + kMemory)
      throw UnsupportedRate("requested rate exceeds what puncturing the mother code supports");
  }

  static ConvCode for_rate(std::size_t payload_bits, double rate) {
    return ConvCode(payload_bits, coded_length_for_rate(payload_bits, rate));
  }

  std::size_t payload_bits() const { return k_; }
  std::size_t coded_bits() const { return plan_.out_length(); }
  std::size_t mother_bits() const { return plan_.mother_length(); }
  const RateMatchPlan& plan() const { return plan_; }

  Bits encode(std::span<const std::uint8_t> payload) const {
    if (payload.size() != k_) throw InvalidArgument("encode: payload length mismatch");
    return plan_.apply(encode_mother(payload));
  }

  /// Max-log BCJR. `apriori` holds payload-bit LLRs and may be empty.
  SisoOutput decode(std::span<const double> llr_in, std::span<const double> apriori = {}) const {
    if (llr_in.size() != coded_bits()) throw InvalidArgument("decode: LLR length mismatch");
    if (!apriori.empty() && apriori.size() != k_) throw InvalidArgument("decode: a-priori length mismatch");

    const auto& tr = detail::kTrellis;
    const std::size_t steps = k_ + kMemory;
    const std::vector<double> ch = plan_.recover(llr_in);

    // Branch metric for each of the 8 output patterns at each step.
    std::vector<std::array<double, 8>> gamma(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      const double* l = &ch[kOutputs * t];
      for (unsigned p = 0; p < 8; ++p) {
        double g = 0.0;
        for (int j = 0; j < kOutputs; ++j) g += ((p >> j) & 1u) ? -0.5 * l[j] : 0.5 * l[j];
        gamma[t][p] = g;
      }
    }
    auto input_metric = [&](std::size_t t, unsigned u) {
      if (t >= k_ || apriori.empty()) return 0.0;
      return u ? -0.5 * apriori[t] : 0.5 * apriori[t];
    };
    auto inputs = [&](std::size_t t) { return t < k_ ? 2u : 1u; };

    std::vector<double> alpha((steps + 1) * kStates, detail::kNegInf);
    std::vector<double> beta((steps + 1) * kStates, detail::kNegInf);
    alpha[0] = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
      const double* a = &alpha[t * kStates];
      double* an = &alpha[(t + 1) * kStates];
      for (int s = 0; s < kStates; ++s) {
        if (a[s] <= detail::kNegInf) continue;
        for (unsigned u = 0; u < inputs(t); ++u) {
          const double m = a[s] + gamma[t][tr.out[s][u]] + input_metric(t, u);
          double& dst = an[tr.next[s][u]];
          if (m > dst) dst = m;
        }
      }
      const double norm = *std::max_element(an, an + kStates);
      for (int s = 0; s < kStates; ++s) an[s] -= norm;
    }
    beta[steps * kStates] = 0.0;  // zero-tail: terminates in state 0
    for (std::size_t t = steps; t-- > 0;) {
      const double* bn = &beta[(t + 1) * kStates];
      double* b = &beta[t * kStates];
      for (int s = 0; s < kStates; ++s) {
        double best = detail::kNegInf;
        for (unsigned u = 0; u < inputs(t); ++u) {
          const double nb = bn[tr.next[s][u]];
          if (nb <= detail::kNegInf) continue;
          best = std::max(best, nb + gamma[t][tr.out[s][u]] + input_metric(t, u));
        }
        b[s] = best;
      }
      const double norm = *std::max_element(b, b + kStates);
      for (int s = 0; s < kStates; ++s)
        if (b[s] > detail::kNegInf) b[s] -= norm;
    }

    SisoOutput res;
    res.payload_llr.resize(k_);
    res.bits.resize(k_);
    std::vector<double> post(mother_bits());
    for (std::size_t t = 0; t < steps; ++t) {
      std::array<double, 2> best_u{detail::kNegInf, detail::kNegInf};
      std::array<std::array<double, 2>, kOutputs> best_c{};
      for (auto& c : best_c) c = {detail::kNegInf, detail::kNegInf};
      const double* a = &alpha[t * kStates];
      const double* bn = &beta[(t + 1) * kStates];
      for (int s = 0; s < kStates; ++s) {
        if (a[s] <= detail::kNegInf) continue;
        for (unsigned u = 0; u < inputs(t); ++u) {
          const double nb = bn[tr.next[s][u]];
          if (nb <= detail::kNegInf) continue;
          const unsigned p = tr.out[s][u];
          const double m = a[s] + gamma[t][p] + input_metric(t, u) + nb;
          best_u[u] = std::max(best_u[u], m);
          for (int j = 0; j < kOutputs; ++j) {
            double& d = best_c[j][(p >> j) & 1u];
            d = std::max(d, m);
          }
        }
      }
      if (t < k_) {
        res.payload_llr[t] = best_u[0] - best_u[1];
        res.bits[t] = res.payload_llr[t] < 0.0 ? 1 : 0;
      }
      for (int j = 0; j < kOutputs; ++j) {
        const auto& c = best_c[j];
        double l = c[0] - c[1];
        if (c[1] <= detail::kNegInf / 2) l = kLlrClip;
        if (c[0] <= detail::kNegInf / 2) l = -kLlrClip;
        post[kOutputs * t + j] = l;
      }
    }

    res.extrinsic.resize(coded_bits());
    const auto pos = plan_.positions();
    for (std::size_t i = 0; i < pos.size(); ++i) res.extrinsic[i] = post[pos[i]] - llr_in[i];
    return res;
  }

  // Posterior magnitude reported for coded bits that only one hypothesis can produce.
  static constexpr double kLlrClip = 1e6;

 private:
  std::size_t k_;
  RateMatchPlan plan_;
};

/// Encode at `target_rate`; output length is ceil(len / target_rate).
inline Bits fec_encode(std::span<const std::uint8_t> payload, double target_rate) {
  return ConvCode::for_rate(payload.size(), target_rate).encode(payload);
}

inline SisoOutput fec_decode_siso(std::span<const double> llr_in, std::span<const double> apriori,
                                  double target_rate, std::size_t payload_bits) {
  const auto code = ConvCode::for_rate(payload_bits, target_rate);
  if (llr_in.size() != code.coded_bits()) throw InvalidArgument("fec_decode_siso: LLR length mismatch");
  return code.decode(llr_in, apriori);
}

}  // namespace nrma::fec
