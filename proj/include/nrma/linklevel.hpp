#pragma once

// Monte-Carlo link-level harness: equal-resource geometry shared by all
// schemes, per-drop simulation with common random numbers, BLER sweeps with
// an error-count stopping rule, and MCS (overloading factor, code rate)
// selection under a BLER target.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nrma/channel.hpp"
#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/csv.hpp"
#include "nrma/fec.hpp"
#include "nrma/idma.hpp"
#include "nrma/modem.hpp"
#include "nrma/musa.hpp"
#include "nrma/oma.hpp"
#include "nrma/parallel.hpp"
#include "nrma/rng.hpp"
#include "nrma/scma.hpp"

namespace nrma {

/// Physical resources of one link-level experiment. Every NR-MA user sends one
/// QPSK-equivalent (2 coded bits) per spreading unit of N REs; the OMA
/// baseline serves the same K users on the same units * N REs.
struct LinkGeometry {
  int spreading_factor = 4;
  int users = 6;
  int units = 0;
  int payload_bits = 0;  // information bits + CRC

  int coded_bits() const { return 2 * units; }
  int total_res() const { return units * spreading_factor; }
  int info_bits() const { return payload_bits - static_cast<int>(crc::kLength); }

  /// Transport-block driven: units = ceil(ceil(payload / cr) / 2), grown until the
  /// REs split evenly across the K OMA users.
  static LinkGeometry for_block(int info_bits, double code_rate, int n, int k) {
    LinkGeometry g{n, k, 0, info_bits + static_cast<int>(crc::kLength)};
    const auto coded = coded_length_for_rate(static_cast<std::size_t>(g.payload_bits), code_rate);
    g.units = static_cast<int>((coded + 1) / 2);
    while ((g.units * n) % k != 0) ++g.units;
    return g;
  }

  /// Resource driven: `res` REs, payload = floor(cr * coded bits).
  static LinkGeometry for_resources(int res, double code_rate, int n, int k) {
    LinkGeometry g{n, k, res / n, 0};
    g.payload_bits = static_cast<int>(std::floor(code_rate * g.coded_bits() + 1e-9));
    return g;
  }

  /// OMA REs per user; exact by construction for for_block geometries.
  int oma_res_per_user() const { return total_res() / users; }
};

/// Simulates drops of one scheme configuration. Immutable after construction;
/// run_drop may be called concurrently.
class LinkSimulator {
 public:
  explicit LinkSimulator(const SchemeConfig& cfg)
      : LinkSimulator(cfg, LinkGeometry::for_block(cfg.info_block_bits, cfg.code_rate, cfg.spreading_factor, cfg.num_users)) {}

  LinkSimulator(const SchemeConfig& cfg, const LinkGeometry& geo)
      : cfg_(cfg), geo_(geo), code_(static_cast<std::size_t>(geo.payload_bits), static_cast<std::size_t>(geo.coded_bits())) {
    switch (cfg_.scheme) {
      case SchemeKind::SCMA:
        codebook_ = scma::build_codebook(geo_.spreading_factor, geo_.users, 4);
        break;
      case SchemeKind::MUSA:
        sequences_ = musa::gen_sequences(geo_.spreading_factor, geo_.users, cfg_.seed).sequences;
        break;
      case SchemeKind::IDMA:
        interleavers_ = idma::make_interleavers(geo_.users, static_cast<std::size_t>(geo_.coded_bits()) * geo_.spreading_factor,
                                                cfg_.seed);
        break;
      case SchemeKind::OMA: {
        oma_ = oma::oma_match(cfg_);
        oma_->res_per_user = geo_.oma_res_per_user();
        oma_code_.emplace(static_cast<std::size_t>(geo_.payload_bits),
                          static_cast<std::size_t>(oma_->res_per_user) * bits_per_symbol(oma_->modulation));
        break;
      }
    }
  }

  const SchemeConfig& config() const { return cfg_; }
  const LinkGeometry& geometry() const { return geo_; }
  const std::optional<oma::OmaConfig>& oma_config() const { return oma_; }
  const fec::ConvCode& code() const { return code_; }

  /// Per-user CRC outcome of drop `drop` at `snr_db`. `user_offsets_db` adds a
  /// per-user received power offset (system-level groups with unequal SINR).
  std::vector<bool> run_drop(std::uint64_t drop, double snr_db, std::span<const double> user_offsets_db = {}) const {
    const int k = geo_.users, n = geo_.spreading_factor, t = geo_.units;
    auto payload_rng = rng_stream(cfg_.seed, stream_id(drop, StreamPurpose::Payload));
    auto channel_rng = rng_stream(cfg_.seed, stream_id(drop, StreamPurpose::Channel));
    auto noise_rng = rng_stream(cfg_.seed, stream_id(drop, StreamPurpose::Noise));

    std::vector<Bits> payload(k);
    for (auto& p : payload) {
      Bits info(static_cast<std::size_t>(geo_.info_bits()));
      for (auto& b : info) b = payload_rng.bit();
      p = crc::attach(info);
    }
    ChannelTensor h = draw_channel(cfg_.channel, k, n, t, channel_rng);
    if (!user_offsets_db.empty())
      for (int u = 0; u < k; ++u) h.scale_user(u, std::pow(10.0, user_offsets_db[u] / 20.0));

    ResourceGrid grid(t, n);
    std::vector<bool> ok(k, false);
    switch (cfg_.scheme) {
      case SchemeKind::SCMA: {
        std::vector<Bits> coded(k);
        for (int u = 0; u < k; ++u) coded[u] = code_.encode(payload[u]);
        grid = scma::scma_encode(coded, codebook_, h);
        const double var = add_noise(grid, snr_db, noise_rng);
        const auto llr = scma::MpaDetector(codebook_).detect(grid, h, var, cfg_.mpa_iterations);
        for (int u = 0; u < k; ++u) ok[u] = crc::check(code_.decode(llr[u]).bits);
        break;
      }
      case SchemeKind::MUSA: {
        const auto& qpsk = modem::constellation(Modulation::QPSK);
        for (int u = 0; u < k; ++u)
          musa::accumulate_user(grid, modem::modulate(code_.encode(payload[u]), qpsk), sequences_[u], h, u);
        const double var = add_noise(grid, snr_db, noise_rng);
        const auto res = musa::mmse_sic_detect(grid, sequences_, h, var, code_);
        for (int u = 0; u < k; ++u) ok[u] = res[u].crc_pass;
        break;
      }
      case SchemeKind::IDMA: {
        const double amp = idma::chip_amplitude(n);
        std::vector<std::vector<cplx>> gains(k, std::vector<cplx>(grid.size()));
        for (int u = 0; u < k; ++u) {
          const auto chips = idma::idma_encode(payload[u], code_, n, interleavers_[u]);
          for (std::size_t c = 0; c < chips.size(); ++c) {
            const cplx g = h(static_cast<int>(c) / n, static_cast<int>(c) % n, u);
            grid[c] += g * chips[c];
            gains[u][c] = g * amp;
          }
        }
        const double var = add_noise(grid, snr_db, noise_rng);
        const auto res = idma::ese_pic_detect(grid.samples(), gains, var, cfg_.esepic_iterations, code_, n, interleavers_);
        for (int u = 0; u < k; ++u) ok[u] = res.crc_pass[u];
        break;
      }
      case SchemeKind::OMA: {
        // The grid carries only noise; user u owns linear REs [u R, (u+1) R).
        const double var = add_noise(grid, snr_db, noise_rng);
        const int r = oma_->res_per_user;
        std::vector<cplx> gains(r);
        for (int u = 0; u < k; ++u) {
          for (int i = 0; i < r; ++i) {
            const int lin = u * r + i;
            gains[i] = h(lin / n, lin % n, u);
          }
          ok[u] = oma::single_user_link(payload[u], *oma_code_, oma_->modulation, gains, var,
                                        [&](std::size_t i) { return grid[static_cast<std::size_t>(u) * r + i]; });
        }
        break;
      }
    }
    return ok;
  }

 private:
  SchemeConfig cfg_;
  LinkGeometry geo_;
  fec::ConvCode code_;
  scma::ScmaCodebook codebook_;
  std::vector<musa::Sequence> sequences_;
  std::vector<idma::Permutation> interleavers_;
  std::optional<oma::OmaConfig> oma_;
  std::optional<fec::ConvCode> oma_code_;
};

struct BlerPoint {
  double snr_db = 0.0;
  double bler = 1.0;
  long errors = 0;
  long blocks = 0;
};
using BlerCurve = std::vector<BlerPoint>;

struct RunOptions {
  long max_blocks = 20000;
  long min_errors = 100;
  int threads = 1;
};

/// Drops until `min_errors` block errors or `max_blocks` blocks (all users'
/// blocks count). Drop indices are the same at every SNR, so the noise and
/// fading realisations are common across the sweep.
inline BlerPoint run_bler_point(const LinkSimulator& sim, double snr_db, const RunOptions& opt) {
  const int k = sim.geometry().users;
  const int threads = std::max(1, opt.threads);
  BlerPoint pt{snr_db, 1.0, 0, 0};
  std::vector<int> failures;
  for (std::uint64_t base = 0;; base += threads) {
    failures.assign(threads, 0);
    parallel_for(0, threads, threads, [&](std::size_t i) {
      const auto ok = sim.run_drop(base + i, snr_db);
      failures[i] = static_cast<int>(std::count(ok.begin(), ok.end(), false));
    });
    for (int i = 0; i < threads; ++i) {
      pt.errors += failures[i];
      pt.blocks += k;
      if (pt.errors >= opt.min_errors || pt.blocks >= opt.max_blocks) {
        pt.bler = static_cast<double>(pt.errors) / static_cast<double>(pt.blocks);
        return pt;
      }
    }
  }
}

inline BlerCurve run_bler(const SchemeConfig& cfg, std::span<const double> snr_list, const RunOptions& opt) {
  const LinkSimulator sim(cfg);
  BlerCurve curve;
  curve.reserve(snr_list.size());
  for (double s : snr_list) curve.push_back(run_bler_point(sim, s, opt));
  return curve;
}

/// SNR at which a curve first reaches `target`, by linear interpolation of
/// log10(BLER) between bracketing points. nullopt when it never does.
inline std::optional<double> crossing_snr(const BlerCurve& curve, double target) {
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].bler > target) continue;
    if (i == 0) return curve[0].snr_db;
    const auto& a = curve[i - 1];
    const auto& b = curve[i];
    const double la = std::log10(std::max(a.bler, 1e-12)), lb = std::log10(std::max(b.bler, 1e-12));
    const double lt = std::log10(target);
    if (la == lb) return b.snr_db;
    return a.snr_db + (la - lt) / (la - lb) * (b.snr_db - a.snr_db);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// MCS selection

inline const std::vector<double> kDefaultOverloadingSet{1.5, 2.0, 3.0};
inline const std::vector<double> kDefaultCodeRateSet{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

struct McsEntry {
  double snr_db = 0.0;
  double of = 0.0;  // 0 = no transmission
  double cr = 0.0;
  double sum_se = 0.0;
  double bler = 1.0;

  bool transmits() const { return of > 0.0; }
  bool same_level(const McsEntry& o) const { return of == o.of && cr == o.cr; }
};

struct McsTable {
  SchemeKind scheme = SchemeKind::SCMA;
  std::vector<McsEntry> entries;  // ascending SNR

  /// Entry of the largest grid SNR not above `snr_db` (clamped to the grid);
  /// below the grid the result is "no transmission".
  McsEntry lookup(double snr_db) const {
    McsEntry none{snr_db};
    const McsEntry* best = nullptr;
    for (const auto& e : entries)
      if (e.snr_db <= snr_db + 1e-9) best = &e;
    return best ? *best : none;
  }

  double peak_se() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.sum_se);
    return m;
  }
};

/// BLER curve of one (overloading factor, code rate) candidate.
struct CandidateCurve {
  double of = 0.0;
  double cr = 0.0;
  BlerCurve curve;  // on the table's SNR grid
};

/// Pure selection step: per SNR, the candidate with BLER <= target and maximum
/// of * 2 * cr * (1 - BLER); ties go to lower of, then lower cr. Each curve is
/// first made non-increasing in SNR (running minimum).
inline McsTable select_mcs(SchemeKind scheme, std::span<const double> snr_grid, std::span<const CandidateCurve> candidates,
                           double target_bler = 0.1) {
  McsTable table{scheme, {}};
  std::vector<std::vector<double>> mono(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double run = 1.0;
    for (const auto& p : candidates[c].curve) {
      run = std::min(run, p.bler);
      mono[c].push_back(run);
    }
  }
  for (std::size_t i = 0; i < snr_grid.size(); ++i) {
    McsEntry e{snr_grid[i]};
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double b = mono[c][i];
      if (b > target_bler) continue;
      const double se = candidates[c].of * 2.0 * candidates[c].cr * (1.0 - b);
      const bool better = !e.transmits() || se > e.sum_se + 1e-12 ||
                          (std::abs(se - e.sum_se) <= 1e-12 &&
                           (candidates[c].of < e.of || (candidates[c].of == e.of && candidates[c].cr < e.cr)));
      if (better) e = {snr_grid[i], candidates[c].of, candidates[c].cr, se, b};
    }
    table.entries.push_back(e);
  }
  return table;
}

struct McsOptions {
  RunOptions run{2000, 100, 1};
  double target_bler = 0.1;
  // Once a candidate measures BLER at or below this, higher SNR points are not
  // simulated and inherit the measured value (curves are non-increasing).
  double saturation_bler = 0.01;
};

/// Sweeps every (of, cr) candidate over the grid and selects per SNR.
inline McsTable build_mcs_table(const SchemeConfig& base, std::span<const double> snr_grid, std::span<const double> of_set,
                                std::span<const double> cr_set, const McsOptions& opt,
                                std::vector<CandidateCurve>* curves_out = nullptr) {
  std::vector<CandidateCurve> candidates;
  for (double of : of_set)
    for (double cr : cr_set) {
      SchemeConfig cfg = base;
      cfg.num_users = users_for_overloading(of, cfg.spreading_factor);
      cfg.code_rate = cr;
      const LinkSimulator sim(cfg);
      CandidateCurve cc{of, cr, {}};
      std::optional<BlerPoint> saturated;
      for (double s : snr_grid) {
        if (saturated) {
          cc.curve.push_back({s, saturated->bler, 0, 0});
          continue;
        }
        const auto pt = run_bler_point(sim, s, opt.run);
        cc.curve.push_back(pt);
        if (pt.bler <= opt.saturation_bler) saturated = pt;
      }
      candidates.push_back(std::move(cc));
    }
  auto table = select_mcs(base.scheme, snr_grid, candidates, opt.target_bler);
  if (curves_out) *curves_out = std::move(candidates);
  return table;
}

// ---------------------------------------------------------------------------
// CSV

inline void write_bler_header(std::ostream& os) { os << "scheme,of,cr,snr_db,bler,blocks,errors\n"; }

inline void write_bler_rows(std::ostream& os, SchemeKind scheme, double of, double cr, const BlerCurve& curve) {
  for (const auto& p : curve)
    os << to_string(scheme) << ',' << csv::num(of) << ',' << csv::num(cr) << ',' << csv::num(p.snr_db) << ','
       << csv::num(p.bler) << ',' << p.blocks << ',' << p.errors << '\n';
}

inline void write_mcs_csv(std::ostream& os, const McsTable& t, bool header = true) {
  if (header) os << "scheme,snr_db,of,cr,sum_se\n";
  for (const auto& e : t.entries)
    os << to_string(t.scheme) << ',' << csv::num(e.snr_db) << ',' << csv::num(e.of) << ',' << csv::num(e.cr) << ','
       << csv::num(e.sum_se) << '\n';
}

/// Reads mcs.csv rows (any schemes); '#' lines are ignored.
inline std::map<SchemeKind, McsTable> read_mcs_csv(std::istream& is) {
  std::map<SchemeKind, McsTable> out;
  std::string line;
  int lineno = 0;
  bool header = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("scheme,", 0) == 0) continue;
    }
    std::stringstream ss(line);
    std::string scheme, f;
    std::vector<double> v;
    std::getline(ss, scheme, ',');
    try {
      while (std::getline(ss, f, ',')) v.push_back(std::stod(f));
    } catch (const std::exception&) {
      throw ParseError("mcs.csv: malformed number on line " + std::to_string(lineno));
    }
    if (v.size() != 4) throw ParseError("mcs.csv: expected 5 columns on line " + std::to_string(lineno));
    auto& t = out[parse_scheme(scheme)];
    t.scheme = parse_scheme(scheme);
    McsEntry e{v[0], v[1], v[2], v[3], 0.0};
    if (e.transmits()) e.bler = 1.0 - v[3] / (v[1] * 2.0 * v[2]);
    t.entries.push_back(e);
  }
  for (auto& [s, t] : out)
    std::sort(t.entries.begin(), t.entries.end(), [](const McsEntry& a, const McsEntry& b) { return a.snr_db < b.snr_db; });
  return out;
}

}  // namespace nrma
