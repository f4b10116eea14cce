#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

namespace nrma::csv {

/// Six significant digits, shortest of fixed/scientific (printf %g).
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// FNV-1a 64-bit, used to fingerprint config files in provenance lines.
inline std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Provenance {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

inline void write_provenance(std::ostream& os, const Provenance& p) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "# config_hash=%016llx seed=%llu\n", static_cast<unsigned long long>(p.config_hash),
                static_cast<unsigned long long>(p.seed));
  os << buf;
}

}  // namespace nrma::csv
