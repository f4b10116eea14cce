#pragma once

// Counter-keyed random streams. A stream is fully determined by
// (seed, stream_id), so Monte-Carlo drops can run in any order or thread
// and still reproduce bit-identical results.

#include <array>
#include <complex>
#include <cstdint>
#include <random>

namespace nrma {

/// Stream-id layout used by the simulators: drop index in the high bits,
/// purpose tag in the low byte.
enum class StreamPurpose : std::uint64_t {
  Payload = 1,
  Channel = 2,
  Noise = 3,
  Interleaver = 4,
  Codebook = 5,
  Sequences = 6,
  Scenario = 7,
  Scheduler = 8,
};

constexpr std::uint64_t stream_id(std::uint64_t index, StreamPurpose purpose) {
  return (index << 8) | static_cast<std::uint64_t>(purpose);
}

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x6e726d61u};
    engine_.seed(seq);
  }

  // UniformRandomBitGenerator interface, so std::shuffle & co. accept a stream.
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint8_t bit() { return static_cast<std::uint8_t>(engine_() >> 63); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }

  double gaussian() { return normal_(engine_); }

  /// Circularly-symmetric complex normal with total variance `var`.
  std::complex<double> complex_gaussian(double var = 1.0) {
    const double s = std::sqrt(var / 2.0);
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {s * re, s * im};
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline RngStream rng_stream(std::uint64_t seed, std::uint64_t stream) { return RngStream(seed, stream); }

}  // namespace nrma
