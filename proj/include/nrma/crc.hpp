#pragma once

// CRC-16/CCITT (poly 0x1021, init 0xFFFF, no reflection, no final xor) over
// bit sequences. Used as block-error ground truth and to gate SIC.

#include <cstdint>
#include <span>

#include "nrma/core.hpp"

namespace nrma::crc {

inline constexpr std::uint16_t kPolynomial = 0x1021;
inline constexpr std::uint16_t kInit = 0xFFFF;
inline constexpr std::size_t kLength = 16;

/// Bit-serial CRC over `bits` (one bit per element, MSB-first order).
inline std::uint16_t crc16(std::span<const std::uint8_t> bits) {
  std::uint16_t reg = kInit;
  for (auto b : bits) {
    const bool feedback = ((reg >> 15) & 1u) != (b & 1u);
    reg = static_cast<std::uint16_t>(reg << 1);
    if (feedback) reg ^= kPolynomial;
  }
  return reg;
}

/// Payload followed by its 16 parity bits, MSB first.
inline Bits attach(std::span<const std::uint8_t> payload) {
  if (payload.empty()) throw InvalidArgument("crc attach: payload must be non-empty");
  Bits block(payload.begin(), payload.end());
  const std::uint16_t c = crc16(payload);
  for (int i = 15; i >= 0; --i) block.push_back(static_cast<std::uint8_t>((c >> i) & 1u));
  return block;
}

/// True when the trailing 16 bits are the CRC of the preceding bits.
inline bool check(std::span<const std::uint8_t> block) {
  if (block.size() <= kLength) return false;
  const auto payload = block.first(block.size() - kLength);
  const std::uint16_t c = crc16(payload);
  for (std::size_t i = 0; i < kLength; ++i) {
    const auto expected = static_cast<std::uint8_t>((c >> (15 - i)) & 1u);
    if ((block[payload.size() + i] & 1u) != expected) return false;
  }
  return true;
}

}  // namespace nrma::crc
