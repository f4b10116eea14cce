#pragma once

// Config-driven experiment pipelines behind the nrma_bench subcommands. Each
// experiment is parsed (and fully validated) from an INI section, then run into
// CSV streams that end with a provenance comment line.

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nrma/config.hpp"
#include "nrma/csv.hpp"
#include "nrma/linklevel.hpp"
#include "nrma/syslevel.hpp"

namespace nrma::exp {

struct Overrides {
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

namespace detail {

inline std::vector<SchemeKind> schemes(const config::Section& s, std::vector<std::string> fallback) {
  std::vector<SchemeKind> out;
  for (const auto& name : s.strings("schemes", std::move(fallback))) {
    try {
      out.push_back(parse_scheme(name));
    } catch (const InvalidArgument& e) {
      throw config::ConfigError(s.qualified("schemes"), e.what());
    }
  }
  return out;
}

inline std::uint64_t seed(const config::Section& s, const Overrides& o) {
  const long v = s.integer("seed", 1, 0);
  return o.seed ? *o.seed : static_cast<std::uint64_t>(v);
}

inline std::vector<double> overloading(const config::Section& s, int n, std::vector<double> fallback) {
  auto v = s.numbers("overloading", std::move(fallback));
  for (double of : v) {
    try {
      const int k = users_for_overloading(of, n);
      if (k <= n) throw InvalidArgument("overloading factor must exceed 1");
    } catch (const InvalidArgument& e) {
      throw config::ConfigError(s.qualified("overloading"), e.what());
    }
  }
  return v;
}

inline std::vector<double> code_rates(const config::Section& s, std::vector<double> fallback) {
  auto v = s.numbers("code_rates", std::move(fallback));
  for (double cr : v)
    if (!(cr > 0.0) || cr >= 1.0) throw config::ConfigError(s.qualified("code_rates"), "code rates must lie in (0, 1)");
  return v;
}

/// Link-level keys shared by [bler] and [mcs].
inline SchemeConfig link_base(const config::Section& s, const Overrides& o) {
  SchemeConfig c;
  c.spreading_factor = static_cast<int>(s.integer("spreading_factor", 4, 2));
  c.info_block_bits = static_cast<int>(s.integer("info_bits", 128, 1));
  c.mpa_iterations = static_cast<int>(s.integer("mpa_iterations", 8, 1));
  c.esepic_iterations = static_cast<int>(s.integer("esepic_iterations", 6, 1));
  try {
    c.channel = parse_channel(s.str("channel", "RAYLEIGH_BLOCK"));
  } catch (const InvalidArgument& e) {
    throw config::ConfigError(s.qualified("channel"), e.what());
  }
  c.seed = seed(s, o);
  return c;
}

inline const std::set<std::string> kLinkKeys{"schemes",    "overloading",    "code_rates",       "snr_db",
                                             "info_bits",  "spreading_factor", "channel",        "max_blocks",
                                             "min_errors", "mpa_iterations",  "esepic_iterations", "seed"};

inline std::set<std::string> with(std::set<std::string> base, std::initializer_list<std::string> extra) {
  base.insert(extra.begin(), extra.end());
  return base;
}

}  // namespace detail

// ---------------------------------------------------------------------------

/// [bler]: one row per (scheme, of, cr, snr). OMA rows are the SE-matched
/// baseline of the NR-MA point (of, cr).
struct BlerExperiment {
  std::vector<SchemeKind> schemes;
  std::vector<double> overloading, code_rates, snr_db;
  SchemeConfig base;
  RunOptions run;

  static BlerExperiment from(const config::File& f, const Overrides& o) {
    const auto s = f.section("bler", detail::kLinkKeys);
    BlerExperiment e;
    e.base = detail::link_base(s, o);
    e.schemes = detail::schemes(s, {"SCMA", "MUSA", "IDMA", "OMA"});
    e.overloading = detail::overloading(s, e.base.spreading_factor, {1.5});
    e.code_rates = detail::code_rates(s, {0.2});
    e.snr_db = s.numbers("snr_db", {-10, -8, -6, -4, -2, 0, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20});
    e.run.max_blocks = s.integer("max_blocks", 20000, 1);
    e.run.min_errors = s.integer("min_errors", 100, 1);
    e.run.threads = o.threads;
    return e;
  }

  void run_to(std::ostream& os, std::uint64_t config_hash) const {
    write_bler_header(os);
    for (auto scheme : schemes)
      for (double of : overloading)
        for (double cr : code_rates) {
          SchemeConfig c = base;
          c.scheme = scheme;
          c.num_users = users_for_overloading(of, c.spreading_factor);
          c.code_rate = cr;
          write_bler_rows(os, scheme, of, cr, run_bler(c, snr_db, run));
        }
    csv::write_provenance(os, {config_hash, base.seed});
  }
};

/// [mcs]: the per-SNR (of, cr) selection for each NR-MA scheme.
struct McsExperiment {
  std::vector<SchemeKind> schemes;
  std::vector<double> overloading, code_rates, snr_db;
  SchemeConfig base;
  McsOptions opt;

  static McsExperiment from(const config::File& f, const Overrides& o) {
    const auto s = f.section("mcs", detail::with(detail::kLinkKeys, {"target_bler", "saturation_bler"}));
    McsExperiment e;
    e.base = detail::link_base(s, o);
    e.schemes = detail::schemes(s, {"SCMA", "MUSA", "IDMA"});
    for (auto k : e.schemes)
      if (k == SchemeKind::OMA) throw config::ConfigError(s.qualified("schemes"), "OMA has no overloading MCS table");
    e.overloading = detail::overloading(s, e.base.spreading_factor, kDefaultOverloadingSet);
    e.code_rates = detail::code_rates(s, kDefaultCodeRateSet);
    e.snr_db = s.numbers("snr_db", {-10, -9, -8, -7, -6, -5, -4, -3, -2, -1, 0,  1,  2,  3,  4,  5,  6,  7,
                                    8,   9,  10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25});
    e.opt.run.max_blocks = s.integer("max_blocks", 2000, 1);
    e.opt.run.min_errors = s.integer("min_errors", 100, 1);
    e.opt.run.threads = o.threads;
    e.opt.target_bler = s.number("target_bler", 0.1);
    e.opt.saturation_bler = s.number("saturation_bler", 0.01);
    if (!(e.opt.target_bler > 0.0 && e.opt.target_bler < 1.0))
      throw config::ConfigError(s.qualified("target_bler"), "must lie in (0, 1)");
    return e;
  }

  std::vector<McsTable> build() const {
    std::vector<McsTable> out;
    for (auto scheme : schemes) {
      SchemeConfig c = base;
      c.scheme = scheme;
      out.push_back(build_mcs_table(c, snr_db, overloading, code_rates, opt));
    }
    return out;
  }

  void run_to(std::ostream& os, std::uint64_t config_hash) const {
    bool header = true;
    for (const auto& t : build()) {
      write_mcs_csv(os, t, header);
      header = false;
    }
    csv::write_provenance(os, {config_hash, base.seed});
  }
};

// ---------------------------------------------------------------------------

/// Keys shared by [syslevel] and [packets].
struct SystemSetup {
  std::vector<SchemeKind> schemes;
  sys::SinrScenario scenario;
  std::string scenario_name;
  std::map<SchemeKind, McsTable> tables;
  sys::ScheduleConfig schedule;
  int ttis = 10000;
  int group_size = 6;
  std::uint64_t seed = 1;
  int threads = 1;

  static SystemSetup from(const config::File& f, const config::Section& s, const Overrides& o) {
    SystemSetup e;
    e.schemes = detail::schemes(s, {"SCMA", "MUSA", "IDMA", "OMA"});
    e.seed = detail::seed(s, o);
    e.threads = o.threads;
    e.ttis = static_cast<int>(s.integer("ttis", 10000, 1));
    e.group_size = static_cast<int>(s.integer("group_size", 6, 1));
    e.schedule.oma_users_per_tti = static_cast<int>(s.integer("oma_users_per_tti", 8, 1));
    if (s.has("trace")) {
      try {
        e.scenario = sys::load_sinr_trace(f.resolve(s.str("trace", "")));
      } catch (const std::exception& ex) {
        throw config::ConfigError(s.qualified("trace"), ex.what());
      }
      e.scenario_name = s.str("scenario", "trace");
    } else {
      sys::SinrModel model;
      try {
        model = sys::parse_sinr_model(s.str("scenario", "urban"));
      } catch (const InvalidArgument& ex) {
        throw config::ConfigError(s.qualified("scenario"), ex.what());
      }
      const int users = static_cast<int>(s.integer("users", 600, 1));
      auto rng = rng_stream(e.seed, stream_id(0, StreamPurpose::Scenario));
      e.scenario = sys::synth_sinr(model, users, rng);
      e.scenario_name = std::string(sys::to_string(model));
    }
    bool need_table = false;
    for (auto k : e.schemes) need_table = need_table || k != SchemeKind::OMA;
    if (need_table) {
      if (!s.has("mcs_table")) throw config::ConfigError(s.qualified("mcs_table"), "required for NR-MA schemes");
      const auto path = f.resolve(s.str("mcs_table", ""));
      std::ifstream in(path);
      if (!in) throw config::ConfigError(s.qualified("mcs_table"), "cannot open '" + path + "'");
      try {
        e.tables = read_mcs_csv(in);
      } catch (const std::exception& ex) {
        throw config::ConfigError(s.qualified("mcs_table"), ex.what());
      }
      for (auto k : e.schemes)
        if (k != SchemeKind::OMA && !e.tables.count(k))
          throw config::ConfigError(s.qualified("mcs_table"), "no rows for " + std::string(to_string(k)));
    }
    return e;
  }

  const McsTable* table(SchemeKind k) const {
    const auto it = tables.find(k);
    return it == tables.end() ? nullptr : &it->second;
  }
};

/// [syslevel]: full-buffer sum-rate CDFs and percentiles.
struct SyslevelExperiment {
  SystemSetup setup;

  static SyslevelExperiment from(const config::File& f, const Overrides& o) {
    const auto s = f.section("syslevel", {"schemes", "scenario", "trace", "users", "ttis", "mcs_table", "group_size",
                                          "oma_users_per_tti", "seed"});
    return {SystemSetup::from(f, s, o)};
  }

  /// Per-scheme samples, in `setup.schemes` order.
  std::vector<std::vector<double>> simulate() const {
    std::vector<std::vector<double>> out;
    for (auto k : setup.schemes)
      out.push_back(sys::run_full_buffer(k, setup.scenario, setup.table(k), setup.schedule, setup.ttis, setup.seed,
                                         setup.threads, setup.group_size));
    return out;
  }

  /// cdf.csv carries a leading scheme column so all schemes share one file.
  void run_to(std::ostream& cdf, std::ostream& pct, std::uint64_t config_hash) const {
    const auto samples = simulate();
    cdf << "scheme,sum_rate_bits,cdf\n";
    sys::write_percentiles_header(pct);
    for (std::size_t i = 0; i < setup.schemes.size(); ++i) {
      std::stringstream rows;
      sys::write_cdf_csv(rows, samples[i], false);
      std::string line;
      while (std::getline(rows, line)) cdf << to_string(setup.schemes[i]) << ',' << line << '\n';
      sys::write_percentiles_row(pct, setup.schemes[i], setup.scenario_name, sys::throughput_percentiles(samples[i]));
    }
    csv::write_provenance(cdf, {config_hash, setup.seed});
    csv::write_provenance(pct, {config_hash, setup.seed});
  }
};

/// [packets]: average sum rate per packet size; ratio against OMA.
struct PacketsExperiment {
  SystemSetup setup;
  std::vector<int> packet_bytes;

  static PacketsExperiment from(const config::File& f, const Overrides& o) {
    const auto s = f.section("packets", {"schemes", "scenario", "trace", "users", "ttis", "mcs_table", "group_size",
                                         "oma_users_per_tti", "seed", "packet_bytes"});
    PacketsExperiment e{SystemSetup::from(f, s, o), {}};
    for (double b : s.numbers("packet_bytes", {20, 50, 100, 200})) {
      if (b < 1 || b != std::floor(b)) throw config::ConfigError(s.qualified("packet_bytes"), "sizes are whole bytes >= 1");
      e.packet_bytes.push_back(static_cast<int>(b));
    }
    return e;
  }

  /// Rows in scheme order; OMA is always simulated as the reference.
  struct Row {
    SchemeKind scheme;
    int packet_bytes;
    double avg_bits;
    double ratio;
  };

  std::vector<Row> simulate() const {
    const auto oma = sys::packet_sweep(SchemeKind::OMA, setup.scenario, nullptr, packet_bytes, setup.schedule, setup.ttis,
                                       setup.seed, setup.threads, setup.group_size);
    std::vector<Row> rows;
    for (auto k : setup.schemes) {
      const auto pts = k == SchemeKind::OMA ? oma
                                            : sys::packet_sweep(k, setup.scenario, setup.table(k), packet_bytes, setup.schedule,
                                                                setup.ttis, setup.seed, setup.threads, setup.group_size);
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double ref = oma[i].avg_bits_per_tti;
        rows.push_back({k, pts[i].packet_bytes, pts[i].avg_bits_per_tti,
                        ref > 0 ? pts[i].avg_bits_per_tti / ref : std::numeric_limits<double>::infinity()});
      }
    }
    return rows;
  }

  void run_to(std::ostream& os, std::uint64_t config_hash) const {
    sys::write_packets_header(os);
    for (const auto& r : simulate())
      os << to_string(r.scheme) << ',' << r.packet_bytes << ',' << csv::num(r.avg_bits) << ',' << csv::num(r.ratio) << '\n';
    csv::write_provenance(os, {config_hash, setup.seed});
  }
};

/// [cqi]: re-derives the OMA CQI thresholds on this simulator's one-RB link.
struct CqiExperiment {
  std::vector<double> snr_db;
  int drops = 1000;
  double target = 0.1;
  std::uint64_t seed = 1;
  int threads = 1;

  static CqiExperiment from(const config::File& f, const Overrides& o) {
    const auto s = f.section("cqi", {"snr_db", "drops", "target_bler", "seed"});
    CqiExperiment e;
    e.snr_db = s.numbers("snr_db", {});
    if (e.snr_db.empty())
      for (int i = 0; i <= 100; ++i) e.snr_db.push_back(-10.0 + 0.5 * i);
    e.drops = static_cast<int>(s.integer("drops", 1000, 1));
    e.target = s.number("target_bler", 0.1);
    e.seed = detail::seed(s, o);
    e.threads = o.threads;
    return e;
  }

  void run_to(std::ostream& os, std::uint64_t config_hash) const {
    const auto& table = sys::cqi_table();
    std::vector<std::optional<double>> th(table.size());
    parallel_for(0, table.size(), threads,
                 [&](std::size_t i) { th[i] = sys::calibrate_cqi_threshold(table[i], snr_db, drops, target, seed); });
    os << "cqi,modulation,code_rate,threshold_db\n";
    for (std::size_t i = 0; i < table.size(); ++i)
      os << table[i].index << ',' << to_string(table[i].modulation) << ',' << csv::num(table[i].code_rate) << ','
         << (th[i] ? csv::num(*th[i]) : std::string("nan")) << '\n';
    csv::write_provenance(os, {config_hash, seed});
  }
};

}  // namespace nrma::exp
