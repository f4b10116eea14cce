#pragma once

// Codebook-based multiple access: sparse codebooks, superposition, and a
// log-domain max-log message-passing detector over the user/RE factor graph.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nrma/channel.hpp"
#include "nrma/core.hpp"
#include "nrma/modem.hpp"

namespace nrma::scma {

inline constexpr int kDefaultIterations = 8;
inline constexpr int kRotationReuse = 4;  // R in e^{j 2 pi r / R}

/// K codebooks of M codewords of length N, sparse according to pattern matrix F.
class ScmaCodebook {
 public:
  ScmaCodebook() = default;

  /// `pattern[n][k]` is 1 where user k occupies RE n; `codewords[(k * M + m) * N + n]`.
  ScmaCodebook(int n, int k, int m, std::vector<std::vector<std::uint8_t>> pattern, std::vector<cplx> codewords)
      : n_(n), k_(k), m_(m), pattern_(std::move(pattern)), words_(std::move(codewords)) {
    if (static_cast<int>(pattern_.size()) != n_) throw InvalidArgument("codebook: pattern needs N rows");
    if (words_.size() != static_cast<std::size_t>(k_) * m_ * n_) throw InvalidArgument("codebook: codeword table size mismatch");
    user_res_.assign(k_, {});
    re_users_.assign(n_, {});
    for (int r = 0; r < n_; ++r) {
      if (static_cast<int>(pattern_[r].size()) != k_) throw InvalidArgument("codebook: pattern needs K columns");
      for (int u = 0; u < k_; ++u)
        if (pattern_[r][u]) {
          user_res_[u].push_back(r);
          re_users_[r].push_back(u);
        }
    }
    dv_ = k_ > 0 ? static_cast<int>(user_res_[0].size()) : 0;
    for (int u = 0; u < k_; ++u) {
      if (static_cast<int>(user_res_[u].size()) != dv_) throw InvalidArgument("codebook: irregular column weight");
      for (int w = 0; w < m_; ++w)
        for (int r = 0; r < n_; ++r)
          if (!pattern_[r][u] && codeword(u, w, r) != cplx{})
            throw InvalidArgument("codebook: non-zero entry outside the sparsity pattern");
    }
  }

  int resources() const { return n_; }
  int users() const { return k_; }
  int codewords_per_user() const { return m_; }
  int bits_per_codeword() const { return static_cast<int>(std::lround(std::log2(m_))); }
  int degree() const { return dv_; }
  const std::vector<std::vector<std::uint8_t>>& pattern() const { return pattern_; }
  std::span<const int> user_resources(int k) const { return user_res_[k]; }
  std::span<const int> resource_users(int n) const { return re_users_[n]; }

  cplx codeword(int k, int m, int n) const { return words_[(static_cast<std::size_t>(k) * m_ + m) * n_ + n]; }
  std::span<const cplx> codeword(int k, int m) const {
    return std::span<const cplx>(words_).subspan((static_cast<std::size_t>(k) * m_ + m) * n_, n_);
  }

 private:
  int n_ = 0, k_ = 0, m_ = 0, dv_ = 0;
  std::vector<std::vector<std::uint8_t>> pattern_;
  std::vector<cplx> words_;
  std::vector<std::vector<int>> user_res_;
  std::vector<std::vector<int>> re_users_;
};

namespace detail {

// Degree-2 patterns ordered so consecutive groups of N/2 patterns tile the REs
// (round-robin 1-factorisation); odd N falls back to lexicographic order.
inline std::vector<std::array<int, 2>> pair_patterns(int n) {
  std::vector<std::array<int, 2>> out;
  if (n % 2 == 0) {
    const int m = n - 1;
    for (int r = 0; r < m; ++r) {
      out.push_back({std::min(r, m), std::max(r, m)});
      for (int i = 1; i < n / 2; ++i) {
        const int a = (r + i) % m, b = (r - i + m) % m;
        out.push_back({std::min(a, b), std::max(a, b)});
      }
    }
  } else {
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) out.push_back({a, b});
  }
  return out;
}

}  // namespace detail

/// Regular d_v = 2 codebook. Users beyond C(N,2) reuse patterns round-robin and
/// carry an extra phase e^{j 2 pi r / 4} for reuse round r. Codewords place a
/// user-rotated QPSK symbol on both occupied REs with energy 1/2 each.
inline ScmaCodebook build_codebook(int n, int k, int m) {
  if (n < 2) throw InvalidArgument("build_codebook: N must be >= 2");
  if (k < 1) throw InvalidArgument("build_codebook: K must be >= 1");
  if (m != 4) throw Unsupported("build_codebook: only M = 4 (2-bit codewords) is supported");

  const auto patterns = detail::pair_patterns(n);
  const int distinct = static_cast<int>(patterns.size());
  const auto& qpsk = modem::constellation(Modulation::QPSK);

  std::vector<std::vector<std::uint8_t>> f(n, std::vector<std::uint8_t>(k, 0));
  std::vector<cplx> words(static_cast<std::size_t>(k) * m * n);
  for (int u = 0; u < k; ++u) {
    const auto& p = patterns[u % distinct];
    const int reuse = u / distinct;
    const double phase = u * std::numbers::pi / (2.0 * k) + 2.0 * std::numbers::pi * reuse / kRotationReuse;
    const cplx rot = std::polar(1.0 / std::sqrt(2.0), phase);
    f[p[0]][u] = f[p[1]][u] = 1;
    for (int w = 0; w < m; ++w) {
      const cplx x = qpsk.point(w) * rot;
      words[(static_cast<std::size_t>(u) * m + w) * n + p[0]] = x;
      words[(static_cast<std::size_t>(u) * m + w) * n + p[1]] = x;
    }
  }
  return ScmaCodebook(n, k, m, std::move(f), std::move(words));
}

/// Codebook for an arbitrary explicit pattern (columns of weight 2), using the
/// same rotated-QPSK codewords as build_codebook.
inline ScmaCodebook codebook_from_patterns(int n, const std::vector<std::array<int, 2>>& user_patterns) {
  const int k = static_cast<int>(user_patterns.size());
  const auto& qpsk = modem::constellation(Modulation::QPSK);
  std::vector<std::vector<std::uint8_t>> f(n, std::vector<std::uint8_t>(k, 0));
  std::vector<cplx> words(static_cast<std::size_t>(k) * 4 * n);
  for (int u = 0; u < k; ++u) {
    const auto& p = user_patterns[u];
    const cplx rot = std::polar(1.0 / std::sqrt(2.0), u * std::numbers::pi / (2.0 * k));
    f[p[0]][u] = f[p[1]][u] = 1;
    for (int w = 0; w < 4; ++w) {
      words[(static_cast<std::size_t>(u) * 4 + w) * n + p[0]] = qpsk.point(w) * rot;
      words[(static_cast<std::size_t>(u) * 4 + w) * n + p[1]] = qpsk.point(w) * rot;
    }
  }
  return ScmaCodebook(n, k, 4, std::move(f), std::move(words));
}

/// Codeword index carried by coded bits [2t, 2t+1] of a user (first bit is the MSB).
inline int codeword_index(std::span<const std::uint8_t> bits, int unit, int bits_per_word) {
  int idx = 0;
  for (int b = 0; b < bits_per_word; ++b) idx = (idx << 1) | (bits[static_cast<std::size_t>(unit) * bits_per_word + b] & 1);
  return idx;
}

/// Noise-free received grid: y(t, n) = sum_k h(t, n, k) x_k(t, n).
inline ResourceGrid scma_encode(std::span<const Bits> user_bits, const ScmaCodebook& cb, const ChannelTensor& h) {
  const int k = cb.users();
  if (static_cast<int>(user_bits.size()) != k) throw InvalidArgument("scma_encode: need one bit sequence per user");
  const int q = cb.bits_per_codeword();
  const std::size_t len = user_bits[0].size();
  for (const auto& b : user_bits)
    if (b.size() != len) throw InvalidArgument("scma_encode: bit-length mismatch across users");
  if (len % q != 0) throw InvalidArgument("scma_encode: bit count not divisible by log2(M)");
  const int units = static_cast<int>(len / q);
  if (h.units() < units || h.elements() != cb.resources() || h.users() < k)
    throw InvalidArgument("scma_encode: channel tensor dimensions do not cover the grid");

  ResourceGrid grid(units, cb.resources());
  for (int t = 0; t < units; ++t)
    for (int u = 0; u < k; ++u) {
      const int w = codeword_index(user_bits[u], t, q);
      for (int n : cb.user_resources(u)) grid.at(t, n) += h(t, n, u) * cb.codeword(u, w, n);
    }
  return grid;
}

/// Max-log MPA. Returns per-user coded-bit LLRs (log2(M) per spreading unit).
/// Each spreading unit is an independent factor graph and is detected on its own.
class MpaDetector {
 public:
  explicit MpaDetector(const ScmaCodebook& cb) : cb_(cb) {
    const int n = cb.resources();
    offsets_.resize(n + 1, 0);
    for (int r = 0; r < n; ++r) offsets_[r + 1] = offsets_[r] + static_cast<int>(cb.resource_users(r).size());
    // Edge index of (user, RE) pairs, for variable-node updates.
    edge_of_.assign(static_cast<std::size_t>(cb.users()) * n, -1);
    for (int r = 0; r < n; ++r) {
      const auto users = cb.resource_users(r);
      for (int i = 0; i < static_cast<int>(users.size()); ++i)
        edge_of_[static_cast<std::size_t>(users[i]) * n + r] = offsets_[r] + i;
    }
    max_degree_ = 0;
    for (int r = 0; r < n; ++r) max_degree_ = std::max(max_degree_, static_cast<int>(cb.resource_users(r).size()));
  }

  std::vector<std::vector<double>> detect(const ResourceGrid& y, const ChannelTensor& h, double noise_var,
                                          int iterations = kDefaultIterations) const {
    if (!(noise_var > 0.0)) throw InvalidArgument("mpa_detect: noise variance must be positive");
    if (iterations < 1) throw InvalidArgument("mpa_detect: iterations must be >= 1");
    const int k = cb_.users(), n = cb_.resources(), m = cb_.codewords_per_user(), q = cb_.bits_per_codeword();
    const int units = y.units();
    const int edges = offsets_[n];

    std::vector<std::vector<double>> llr(k, std::vector<double>(static_cast<std::size_t>(units) * q));
    std::vector<double> v2f(static_cast<std::size_t>(edges) * m), f2v(static_cast<std::size_t>(edges) * m);
    std::size_t max_combos = 1;
    for (int d = 0; d < max_degree_; ++d) max_combos *= m;
    // metric holds -|y - sum h x|^2 / sigma^2 per RE and combination, for one unit.
    std::vector<std::vector<double>> metric(n);
    std::vector<cplx> partial(max_combos);
    std::vector<double> score(max_combos);
    std::vector<double> belief(m);
    const double inv = 1.0 / noise_var;

    for (int t = 0; t < units; ++t) {
      for (int r = 0; r < n; ++r) build_metric(y.at(t, r), h, t, r, inv, metric[r], partial);
      std::fill(v2f.begin(), v2f.end(), 0.0);
      for (int it = 0; it < iterations; ++it) {
        for (int r = 0; r < n; ++r) function_update(r, metric[r], v2f, f2v, score);
        variable_update(v2f, f2v);
      }
      for (int u = 0; u < k; ++u) {
        std::fill(belief.begin(), belief.end(), 0.0);
        for (int r : cb_.user_resources(u)) {
          const double* msg = &f2v[static_cast<std::size_t>(edge_of_[static_cast<std::size_t>(u) * n + r]) * m];
          for (int w = 0; w < m; ++w) belief[w] += msg[w];
        }
        for (int b = 0; b < q; ++b) {
          double best0 = -std::numeric_limits<double>::infinity(), best1 = best0;
          for (int w = 0; w < m; ++w) {
            if ((w >> (q - 1 - b)) & 1) best1 = std::max(best1, belief[w]);
            else best0 = std::max(best0, belief[w]);
          }
          llr[u][static_cast<std::size_t>(t) * q + b] = best0 - best1;
        }
      }
    }
    return llr;
  }

 private:
  void build_metric(cplx yr, const ChannelTensor& h, int t, int r, double inv, std::vector<double>& metric,
                    std::vector<cplx>& partial) const {
    const auto users = cb_.resource_users(r);
    const int m = cb_.codewords_per_user();
    std::size_t size = 1;
    partial[0] = {};
    // Combination index = sum_i w_i * M^i, built one user at a time.
    for (int i = 0; i < static_cast<int>(users.size()); ++i) {
      const int u = users[i];
      const cplx g = h(t, r, u);
      for (int w = m - 1; w >= 0; --w) {
        const cplx c = g * cb_.codeword(u, w, r);
        for (std::size_t j = 0; j < size; ++j) partial[w * size + j] = partial[j] + c;
      }
      size *= m;
    }
    metric.resize(size);
    for (std::size_t j = 0; j < size; ++j) metric[j] = -std::norm(yr - partial[j]) * inv;
  }

  void function_update(int r, const std::vector<double>& metric, const std::vector<double>& v2f, std::vector<double>& f2v,
                       std::vector<double>& score) const {
    const int m = cb_.codewords_per_user();
    const int deg = offsets_[r + 1] - offsets_[r];
    if (deg == 0) return;
    const std::size_t size = metric.size();
    // score = metric + sum of incoming messages, built like the metric table.
    std::size_t span = 1;
    score[0] = 0.0;
    for (int i = 0; i < deg; ++i) {
      const double* in = &v2f[static_cast<std::size_t>(offsets_[r] + i) * m];
      for (int w = m - 1; w >= 0; --w)
        for (std::size_t j = 0; j < span; ++j) score[w * span + j] = score[j] + in[w];
      span *= m;
    }
    for (std::size_t j = 0; j < size; ++j) score[j] += metric[j];

    std::size_t stride = 1;
    for (int i = 0; i < deg; ++i) {
      double* out = &f2v[static_cast<std::size_t>(offsets_[r] + i) * m];
      const double* in = &v2f[static_cast<std::size_t>(offsets_[r] + i) * m];
      double best[8];
      std::fill(best, best + m, -std::numeric_limits<double>::infinity());
      for (std::size_t hi = 0; hi < size; hi += stride * m)
        for (int w = 0; w < m; ++w) {
          const double* blk = &score[hi + w * stride];
          double b = best[w];
          for (std::size_t lo = 0; lo < stride; ++lo) b = std::max(b, blk[lo]);
          best[w] = b;
        }
      double top = -std::numeric_limits<double>::infinity();
      for (int w = 0; w < m; ++w) {
        out[w] = best[w] - in[w];
        top = std::max(top, out[w]);
      }
      for (int w = 0; w < m; ++w) out[w] -= top;
      stride *= m;
    }
  }

  void variable_update(std::vector<double>& v2f, const std::vector<double>& f2v) const {
    const int n = cb_.resources(), m = cb_.codewords_per_user();
    for (int u = 0; u < cb_.users(); ++u) {
      const auto res = cb_.user_resources(u);
      for (int a : res) {
        double* out = &v2f[static_cast<std::size_t>(edge_of_[static_cast<std::size_t>(u) * n + a]) * m];
        std::fill(out, out + m, 0.0);
        for (int b : res) {
          if (b == a) continue;
          const double* in = &f2v[static_cast<std::size_t>(edge_of_[static_cast<std::size_t>(u) * n + b]) * m];
          for (int w = 0; w < m; ++w) out[w] += in[w];
        }
        const double top = *std::max_element(out, out + m);
        for (int w = 0; w < m; ++w) out[w] -= top;
      }
    }
  }

  const ScmaCodebook& cb_;
  std::vector<int> offsets_;
  std::vector<int> edge_of_;
  int max_degree_ = 0;
};

inline std::vector<std::vector<double>> mpa_detect(const ResourceGrid& y, const ChannelTensor& h, const ScmaCodebook& cb,
                                                   double noise_var, int iterations = kDefaultIterations) {
  return MpaDetector(cb).detect(y, h, noise_var, iterations);
}

// Plain-text codebook format:
//   N K M d_v
//   N rows of K space-separated 0/1 pattern entries
//   for each user, M lines of N "re im" pairs (9 significant digits)
inline void write_codebook(std::ostream& os, const ScmaCodebook& cb) {
  os << cb.resources() << ' ' << cb.users() << ' ' << cb.codewords_per_user() << ' ' << cb.degree() << '\n';
  for (const auto& row : cb.pattern()) {
    for (std::size_t u = 0; u < row.size(); ++u) os << (u ? " " : "") << int(row[u]);
    os << '\n';
  }
  const auto old = os.precision(9);
  for (int u = 0; u < cb.users(); ++u)
    for (int w = 0; w < cb.codewords_per_user(); ++w) {
      for (int r = 0; r < cb.resources(); ++r) {
        const cplx c = cb.codeword(u, w, r);
        os << (r ? " " : "") << c.real() << ' ' << c.imag();
      }
      os << '\n';
    }
  os.precision(old);
}

inline ScmaCodebook read_codebook(std::istream& is) {
  int n = 0, k = 0, m = 0, dv = 0;
  if (!(is >> n >> k >> m >> dv) || n < 1 || k < 1 || m < 1) throw ParseError("codebook: bad header");
  std::vector<std::vector<std::uint8_t>> f(n, std::vector<std::uint8_t>(k));
  for (auto& row : f)
    for (auto& v : row) {
      int x;
      if (!(is >> x) || (x != 0 && x != 1)) throw ParseError("codebook: bad pattern entry");
      v = static_cast<std::uint8_t>(x);
    }
  std::vector<cplx> words(static_cast<std::size_t>(k) * m * n);
  for (auto& c : words) {
    double re, im;
    if (!(is >> re >> im)) throw ParseError("codebook: truncated codeword table");
    c = {re, im};
  }
  ScmaCodebook cb(n, k, m, std::move(f), std::move(words));
  if (cb.degree() != dv) throw ParseError("codebook: header d_v does not match the pattern");
  return cb;
}

}  // namespace nrma::scma
