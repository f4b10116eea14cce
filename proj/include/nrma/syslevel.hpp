#pragma once

// System-level evaluation: per-user SINR populations (ingested or synthesised),
// same-MCS group formation, random group scheduling over 8 RBs for NR-MA,
// per-RB CQI scheduling for OMA, and throughput statistics for full-buffer and
// packet traffic.

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "nrma/core.hpp"
#include "nrma/crc.hpp"
#include "nrma/csv.hpp"
#include "nrma/linklevel.hpp"
#include "nrma/oma.hpp"
#include "nrma/parallel.hpp"
#include "nrma/rng.hpp"

namespace nrma::sys {

inline constexpr int kSubcarriersPerRb = 12;
inline constexpr int kSymbolsPerRb = 14;
inline constexpr int kResPerRb = kSubcarriersPerRb * kSymbolsPerRb;  // 168

// ---------------------------------------------------------------------------
// SINR populations

enum class SinrModel { URBAN, INDOOR };

inline std::string_view to_string(SinrModel m) { return m == SinrModel::URBAN ? "urban" : "indoor"; }

inline SinrModel parse_sinr_model(std::string_view s) {
  if (s == "urban" || s == "URBAN") return SinrModel::URBAN;
  if (s == "indoor" || s == "INDOOR") return SinrModel::INDOOR;
  throw InvalidArgument("unknown SINR model '" + std::string(s) + "'");
}

struct SinrScenario {
  std::vector<double> sinr_db;
  std::string provenance;  // "file", "urban_model" or "indoor_model"
};

/// Urban: three-component mixture on [-20, 70] dB with 40% of users above 20 dB
/// (strong outdoor links), 45% in [5, 20) dB and 15% in [-20, 5) dB.
/// Indoor: normal(3 dB, 5 dB) truncated to [-10, 15] dB (interference limited).
inline SinrScenario synth_sinr(SinrModel model, int num_users, RngStream& stream) {
  if (num_users < 1) throw InvalidArgument("synth_sinr: num_users must be >= 1");
  SinrScenario s{{}, model == SinrModel::URBAN ? "urban_model" : "indoor_model"};
  s.sinr_db.reserve(num_users);
  for (int i = 0; i < num_users; ++i) {
    if (model == SinrModel::URBAN) {
      const double c = stream.uniform();
      const double u = stream.uniform();
      if (c < 0.40) s.sinr_db.push_back(20.0 + 50.0 * u);
      else if (c < 0.85) s.sinr_db.push_back(5.0 + 15.0 * u);
      else s.sinr_db.push_back(-20.0 + 25.0 * u);
    } else {
      double v;
      do v = 3.0 + 5.0 * stream.gaussian();
      while (v < -10.0 || v > 15.0);
      s.sinr_db.push_back(v);
    }
  }
  return s;
}

/// One decimal dB value per line; '#' starts a comment line; blank lines are skipped.
inline SinrScenario parse_sinr_trace(std::istream& is) {
  SinrScenario s{{}, "file"};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    const std::string tok = line.substr(first, last - first + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || !std::isfinite(v))
      throw ParseError("SINR trace: malformed value on line " + std::to_string(lineno));
    s.sinr_db.push_back(v);
  }
  if (s.sinr_db.empty()) throw InvalidArgument("SINR trace: no values");
  return s;
}

inline SinrScenario load_sinr_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("SINR trace: cannot open '" + path + "'");
  return parse_sinr_trace(in);
}

/// 17 significant digits, so values read back bit-exact.
inline void write_sinr_trace(std::ostream& os, const SinrScenario& s) {
  char buf[32];
  for (double v : s.sinr_db) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf << '\n';
  }
}

// ---------------------------------------------------------------------------
// OMA CQI table

struct CqiEntry {
  int index = 0;
  Modulation modulation = Modulation::QPSK;
  double code_rate = 0.0;
  double threshold_db = 0.0;  // lowest SINR at which one-RB BLER <= 0.1
};

/// 15 entries with the LTE CQI modulation / code-rate pairs (x/1024). The SINR
/// thresholds are those at which this simulator's one-RB link (168 REs,
/// Rayleigh per RE, convolutional code) first reaches BLER <= 0.1, measured on
/// a 0.5 dB grid with the cqi_calibrate tool.
inline const std::array<CqiEntry, 15>& cqi_table() {
  static const std::array<CqiEntry, 15> table{{
      {1, Modulation::QPSK, 78 / 1024.0, -6.0},
      {2, Modulation::QPSK, 120 / 1024.0, -4.0},
      {3, Modulation::QPSK, 193 / 1024.0, 0.0},
      {4, Modulation::QPSK, 308 / 1024.0, 1.5},
      {5, Modulation::QPSK, 449 / 1024.0, 4.5},
      {6, Modulation::QPSK, 602 / 1024.0, 7.0},
      {7, Modulation::QAM16, 378 / 1024.0, 9.5},
      {8, Modulation::QAM16, 490 / 1024.0, 12.0},
      {9, Modulation::QAM16, 616 / 1024.0, 15.0},
      {10, Modulation::QAM64, 466 / 1024.0, 17.0},
      {11, Modulation::QAM64, 567 / 1024.0, 20.0},
      {12, Modulation::QAM64, 666 / 1024.0, 22.5},
      {13, Modulation::QAM64, 772 / 1024.0, 25.5},
      {14, Modulation::QAM64, 873 / 1024.0, 28.5},
      {15, Modulation::QAM64, 948 / 1024.0, 31.5},
  }};
  return table;
}

/// Highest entry whose threshold the SINR meets; nullptr below CQI 1.
inline const CqiEntry* select_cqi(double sinr_db) {
  const CqiEntry* best = nullptr;
  for (const auto& e : cqi_table())
    if (sinr_db >= e.threshold_db) best = &e;
  return best;
}

/// Payload (CRC included) carried by `res` REs at a CQI entry.
inline int oma_payload_bits(const CqiEntry& e, int res) {
  return static_cast<int>(std::floor(e.code_rate * res * bits_per_symbol(e.modulation) + 1e-9));
}

/// Information bits of one RB at a CQI entry.
inline int oma_rb_info_bits(const CqiEntry& e) { return oma_payload_bits(e, kResPerRb) - static_cast<int>(crc::kLength); }

/// One single-user transmission of `payload_bits` (CRC included) over `res`
/// REs at the entry's modulation, i.i.d. Rayleigh per RE. Streams are keyed by `drop`.
inline bool oma_link_drop(const CqiEntry& e, int res, int payload_bits, double snr_db, std::uint64_t seed, std::uint64_t drop) {
  const int q = bits_per_symbol(e.modulation);
  const fec::ConvCode code(static_cast<std::size_t>(payload_bits), static_cast<std::size_t>(res) * q);
  auto payload_rng = rng_stream(seed, stream_id(drop, StreamPurpose::Payload));
  auto channel_rng = rng_stream(seed, stream_id(drop, StreamPurpose::Channel));
  auto noise_rng = rng_stream(seed, stream_id(drop, StreamPurpose::Noise));
  Bits info(static_cast<std::size_t>(payload_bits) - crc::kLength);
  for (auto& b : info) b = payload_rng.bit();
  const Bits block = crc::attach(info);
  std::vector<cplx> gains(res);
  for (auto& g : gains) g = channel_rng.complex_gaussian(1.0);
  const double var = noise_variance(snr_db);
  std::vector<cplx> noise(res);
  for (auto& w : noise) w = noise_rng.complex_gaussian(var);
  return oma::single_user_link(block, code, e.modulation, gains, var, [&](std::size_t i) { return noise[i]; });
}

/// Lowest SINR on `grid` at which the one-RB BLER of entry `e` is <= target.
inline std::optional<double> calibrate_cqi_threshold(const CqiEntry& e, std::span<const double> grid, int drops,
                                                     double target = 0.1, std::uint64_t seed = 1) {
  const int payload = oma_payload_bits(e, kResPerRb);
  for (double s : grid) {
    int fails = 0;
    for (int d = 0; d < drops; ++d) fails += !oma_link_drop(e, kResPerRb, payload, s, seed, static_cast<std::uint64_t>(d));
    if (fails <= target * drops) return s;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Group formation

struct ScheduleConfig {
  int rbs_per_group = 8;
  int res_per_rb = kResPerRb;
  double tti_ms = 1.0;
  int spreading_factor = 4;
  // Users served by OMA in one TTI; the 8 RBs are split evenly among them
  // (8 = a fresh random user on every RB).
  int oma_users_per_tti = 8;

  int group_res() const { return rbs_per_group * res_per_rb; }
  int group_units() const { return group_res() / spreading_factor; }
};

struct UserGroup {
  McsEntry mcs;  // of == 0: no transmission
  std::vector<int> users;
};

/// Users are mapped to the MCS entry of their SINR (largest grid SNR not above
/// it). Users sharing an entry are split, in index order, into groups of
/// K = of * N; the remainder forms one partial group. Users without a feasible
/// entry are grouped the same way with `group_size_target` members each; such
/// groups are never scheduled.
inline std::vector<UserGroup> form_groups(const SinrScenario& scenario, const McsTable& table, int group_size_target = 6,
                                          int spreading_factor = 4) {
  if (group_size_target < 1) throw InvalidArgument("form_groups: group size must be >= 1");
  std::map<std::pair<double, double>, std::vector<int>> levels;
  std::map<std::pair<double, double>, McsEntry> level_entry;
  for (std::size_t u = 0; u < scenario.sinr_db.size(); ++u) {
    const McsEntry e = table.lookup(scenario.sinr_db[u]);
    const std::pair<double, double> key = e.transmits() ? std::make_pair(e.of, e.cr) : std::make_pair(0.0, 0.0);
    levels[key].push_back(static_cast<int>(u));
    auto it = level_entry.find(key);
    if (it == level_entry.end()) level_entry.emplace(key, e);
  }
  std::vector<UserGroup> groups;
  for (const auto& [key, users] : levels) {
    McsEntry e = level_entry.at(key);
    const int size = e.transmits() ? users_for_overloading(e.of, spreading_factor) : group_size_target;
    for (std::size_t i = 0; i < users.size(); i += size) {
      UserGroup g{e, {}};
      g.users.assign(users.begin() + static_cast<std::ptrdiff_t>(i),
                     users.begin() + static_cast<std::ptrdiff_t>(std::min(users.size(), i + size)));
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

// ---------------------------------------------------------------------------
// TTI simulation

/// Per-user information bits of an NR-MA group transmission over the 8 RBs.
inline int nrma_info_bits(double cr, const ScheduleConfig& sc) {
  return static_cast<int>(std::floor(cr * 2.0 * sc.group_units() + 1e-9)) - static_cast<int>(crc::kLength);
}

/// Caches one LinkSimulator per (users, code rate, payload); thread-safe after
/// prepare() has been called for every group that will be simulated.
class LinkCache {
 public:
  LinkCache(SchemeKind scheme, std::uint64_t seed, int spreading_factor) : scheme_(scheme), seed_(seed), n_(spreading_factor) {}

  void prepare(int users, double cr, int units, int payload_bits) {
    const Key key{users, cr, units, payload_bits};
    if (sims_.count(key)) return;
    SchemeConfig cfg;
    cfg.scheme = scheme_;
    cfg.spreading_factor = n_;
    cfg.num_users = users;
    cfg.code_rate = cr;
    cfg.seed = seed_;
    const LinkGeometry geo{n_, users, units, payload_bits};
    sims_.emplace(key, std::make_unique<LinkSimulator>(cfg, geo));
  }

  const LinkSimulator& get(int users, double cr, int units, int payload_bits) const {
    return *sims_.at(Key{users, cr, units, payload_bits});
  }

 private:
  using Key = std::tuple<int, double, int, int>;
  SchemeKind scheme_;
  std::uint64_t seed_;
  int n_;
  std::map<Key, std::unique_ptr<LinkSimulator>> sims_;
};

/// Scheduler pick for TTI `tti`: a uniform index in [0, count).
inline std::size_t scheduled_index(std::uint64_t seed, std::uint64_t tti, std::size_t count, std::uint64_t slot = 0) {
  auto rng = rng_stream(seed, stream_id(tti * 16 + slot, StreamPurpose::Scheduler));
  return static_cast<std::size_t>(rng.below(count));
}

/// Groups with a feasible MCS level. Only these are scheduled; a group without
/// one has nothing to send.
inline std::vector<std::size_t> schedulable_groups(const std::vector<UserGroup>& groups) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < groups.size(); ++i)
    if (groups[i].mcs.transmits()) out.push_back(i);
  return out;
}

/// Users with CQI >= 1 (CQI 0 is out of range and never scheduled).
inline std::vector<int> schedulable_users(const SinrScenario& scenario) {
  std::vector<int> out;
  for (std::size_t u = 0; u < scenario.sinr_db.size(); ++u)
    if (select_cqi(scenario.sinr_db[u])) out.push_back(static_cast<int>(u));
  return out;
}

/// NR-MA TTI: one random schedulable group (indices `active`) transmits over the
/// 8 RBs at its MCS, each member at its own SINR. Returns delivered information bits.
inline double simulate_tti_nrma(const std::vector<UserGroup>& groups, std::span<const std::size_t> active,
                                const SinrScenario& scenario, const LinkCache& cache, const ScheduleConfig& sc,
                                std::uint64_t seed, std::uint64_t tti) {
  if (active.empty()) return 0.0;
  const auto& g = groups[active[scheduled_index(seed, tti, active.size())]];
  const int info = nrma_info_bits(g.mcs.cr, sc);
  const int k = static_cast<int>(g.users.size());
  const auto& sim = cache.get(k, g.mcs.cr, sc.group_units(), info + static_cast<int>(crc::kLength));
  std::vector<double> offsets(k);
  for (int i = 0; i < k; ++i) offsets[i] = scenario.sinr_db[g.users[i]];
  const auto ok = sim.run_drop(tti, 0.0, offsets);
  return static_cast<double>(std::count(ok.begin(), ok.end(), true)) * info;
}

/// OMA TTI: `oma_users_per_tti` random users from `active` share the RBs evenly;
/// each RB carries one transport block at the user's CQI. Returns delivered
/// information bits.
inline double simulate_tti_oma(const SinrScenario& scenario, std::span<const int> active, const ScheduleConfig& sc,
                               std::uint64_t seed, std::uint64_t tti) {
  if (active.empty()) return 0.0;
  const int users = std::clamp(sc.oma_users_per_tti, 1, sc.rbs_per_group);
  const int per_user = sc.rbs_per_group / users;
  double bits = 0.0;
  for (int rb = 0; rb < sc.rbs_per_group; ++rb) {
    const auto slot = static_cast<std::uint64_t>(std::min(rb / per_user, users - 1));
    const auto user = active[scheduled_index(seed, tti, active.size(), 1 + slot)];
    const double sinr = scenario.sinr_db[user];
    const CqiEntry* e = select_cqi(sinr);
    if (!e) continue;
    const int payload = oma_payload_bits(*e, sc.res_per_rb);
    if (oma_link_drop(*e, sc.res_per_rb, payload, sinr, seed, tti * 16 + rb))
      bits += payload - static_cast<int>(crc::kLength);
  }
  return bits;
}

/// Sum rate (bits per TTI) of `ttis` TTIs for one scheme.
inline std::vector<double> run_full_buffer(SchemeKind scheme, const SinrScenario& scenario, const McsTable* table,
                                           const ScheduleConfig& sc, int ttis, std::uint64_t seed, int threads,
                                           int group_size_target = 6) {
  std::vector<double> out(ttis, 0.0);
  if (scheme == SchemeKind::OMA) {
    const auto active = schedulable_users(scenario);
    parallel_for(0, ttis, threads, [&](std::size_t t) { out[t] = simulate_tti_oma(scenario, active, sc, seed, t); });
    return out;
  }
  if (!table) throw InvalidArgument("run_full_buffer: NR-MA schemes need an MCS table");
  const auto groups = form_groups(scenario, *table, group_size_target, sc.spreading_factor);
  const auto active = schedulable_groups(groups);
  LinkCache cache(scheme, seed, sc.spreading_factor);
  for (const auto& g : groups)
    if (g.mcs.transmits())
      cache.prepare(static_cast<int>(g.users.size()), g.mcs.cr, sc.group_units(),
                    nrma_info_bits(g.mcs.cr, sc) + static_cast<int>(crc::kLength));
  parallel_for(0, ttis, threads,
               [&](std::size_t t) { out[t] = simulate_tti_nrma(groups, active, scenario, cache, sc, seed, t); });
  return out;
}

// ---------------------------------------------------------------------------
// Statistics

struct Percentiles {
  double p10 = 0.0, p50 = 0.0, p90 = 0.0;
};

/// Nearest-rank percentile: the ceil(p/100 * n)-th smallest sample.
inline double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) throw InvalidArgument("percentile: no samples");
  std::sort(samples.begin(), samples.end());
  const auto n = samples.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return samples[rank - 1];
}

inline Percentiles throughput_percentiles(const std::vector<double>& samples) {
  return {percentile(samples, 10), percentile(samples, 50), percentile(samples, 90)};
}

/// Empirical CDF: one row per distinct value, cdf = fraction of samples <= value.
inline void write_cdf_csv(std::ostream& os, const std::vector<double>& samples, bool header = true) {
  auto s = samples;
  std::sort(s.begin(), s.end());
  if (header) os << "sum_rate_bits,cdf\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
    os << csv::num(s[i]) << ',' << csv::num(static_cast<double>(i + 1) / static_cast<double>(s.size())) << '\n';
  }
}

inline void write_percentiles_header(std::ostream& os) { os << "scheme,scenario,p10,p50,p90\n"; }

inline void write_percentiles_row(std::ostream& os, SchemeKind scheme, std::string_view scenario, const Percentiles& p) {
  os << nrma::to_string(scheme) << ',' << scenario << ',' << csv::num(p.p10) << ',' << csv::num(p.p50) << ','
     << csv::num(p.p90) << '\n';
}

// ---------------------------------------------------------------------------
// Packet traffic

/// Largest packet (bytes) any scheme can carry: OMA's top CQI over the 8 RBs.
inline int max_packet_bytes(const ScheduleConfig& sc) {
  return (oma_payload_bits(cqi_table().back(), sc.group_res()) - static_cast<int>(crc::kLength)) / 8;
}

/// Spreading units one packet of `info_bits` needs at code rate `cr`.
inline int packet_units(int info_bits, double cr) {
  const auto coded = coded_length_for_rate(static_cast<std::size_t>(info_bits) + crc::kLength, cr);
  return static_cast<int>((coded + 1) / 2);
}

/// OMA RBs one packet needs at a CQI entry (partially filled RBs are wasted).
inline int packet_rbs(int info_bits, const CqiEntry& e) {
  const int cap = oma_rb_info_bits(e);
  return (info_bits + cap - 1) / cap;
}

struct PacketPoint {
  int packet_bytes = 0;
  double avg_bits_per_tti = 0.0;
};

/// Average delivered bits per TTI when every scheduled user carries one packet.
/// NR-MA: a random group superposes its K packets on the units a packet needs at
/// the group's code rate; the 8 RBs repeat such transmissions back to back
/// (rate = delivered bits * group units / packet units). OMA: each RB slot goes
/// to a random user with CQI >= 1 whose packet occupies ceil(packet / RB capacity) RBs at its
/// CQI, the rest of the last RB being wasted.
inline std::vector<PacketPoint> packet_sweep(SchemeKind scheme, const SinrScenario& scenario, const McsTable* table,
                                             std::span<const int> packet_bytes, const ScheduleConfig& sc, int ttis,
                                             std::uint64_t seed, int threads, int group_size_target = 6) {
  std::vector<PacketPoint> out;
  const int limit = max_packet_bytes(sc);
  for (int bytes : packet_bytes) {
    if (bytes < 1) throw InvalidArgument("packet_sweep: packet size must be >= 1 byte");
    if (bytes > limit) throw Infeasible("packet_sweep: " + std::to_string(bytes) + "-byte packets do not fit in " +
                                        std::to_string(sc.rbs_per_group) + " RBs");
  }
  std::vector<UserGroup> groups;
  std::vector<std::size_t> active;
  if (scheme != SchemeKind::OMA) {
    if (!table) throw InvalidArgument("packet_sweep: NR-MA schemes need an MCS table");
    groups = form_groups(scenario, *table, group_size_target, sc.spreading_factor);
    active = schedulable_groups(groups);
  }
  const auto users = schedulable_users(scenario);
  for (int bytes : packet_bytes) {
    const int info = bytes * 8;
    std::vector<double> rate(ttis, 0.0);
    if (scheme == SchemeKind::OMA) {
      parallel_for(0, ttis, threads, [&](std::size_t t) {
        double bits = 0.0;
        for (int rb = 0; rb < sc.rbs_per_group; ++rb) {
          if (users.empty()) break;
          const auto user = users[scheduled_index(seed, t, users.size(), 1 + static_cast<std::uint64_t>(rb))];
          const double sinr = scenario.sinr_db[user];
          const CqiEntry* e = select_cqi(sinr);
          const int rbs = packet_rbs(info, *e);
          if (oma_link_drop(*e, rbs * sc.res_per_rb, info + static_cast<int>(crc::kLength), sinr, seed, t * 16 + rb))
            bits += static_cast<double>(info) / rbs;
        }
        rate[t] = bits;
      });
    } else {
      LinkCache cache(scheme, seed, sc.spreading_factor);
      for (const auto& g : groups)
        if (g.mcs.transmits())
          cache.prepare(static_cast<int>(g.users.size()), g.mcs.cr, packet_units(info, g.mcs.cr),
                        info + static_cast<int>(crc::kLength));
      parallel_for(0, ttis, threads, [&](std::size_t t) {
        if (active.empty()) return;
        const auto& g = groups[active[scheduled_index(seed, t, active.size())]];
        const int k = static_cast<int>(g.users.size());
        const int units = packet_units(info, g.mcs.cr);
        const auto& sim = cache.get(k, g.mcs.cr, units, info + static_cast<int>(crc::kLength));
        std::vector<double> offsets(k);
        for (int i = 0; i < k; ++i) offsets[i] = scenario.sinr_db[g.users[i]];
        const auto ok = sim.run_drop(t, 0.0, offsets);
        const double delivered = static_cast<double>(std::count(ok.begin(), ok.end(), true)) * info;
        rate[t] = delivered * sc.group_units() / units;
      });
    }
    double sum = 0.0;
    for (double r : rate) sum += r;
    out.push_back({bytes, sum / ttis});
  }
  return out;
}

inline void write_packets_header(std::ostream& os) { os << "scheme,packet_bytes,avg_sum_rate_bits,ratio_vs_oma\n"; }

}  // namespace nrma::sys
