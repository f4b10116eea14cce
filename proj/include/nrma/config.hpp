#pragma once

// INI experiment files. One section per command; every key is optional and
// falls back to the defaults below. Lists are comma separated, and numeric
// lists also accept "start:step:stop" ranges (inclusive).
//
//   [bler]      schemes, overloading, code_rates, snr_db, info_bits, spreading_factor,
//               channel, max_blocks, min_errors, mpa_iterations, esepic_iterations, seed
//   [mcs]       as [bler] plus target_bler, saturation_bler
//   [syslevel]  schemes, scenario (urban | indoor), trace, users, ttis, mcs_table,
//               group_size, oma_users_per_tti, seed
//   [packets]   as [syslevel] plus packet_bytes
//   [cqi]       snr_db, drops, target_bler, seed

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nrma/core.hpp"

namespace nrma::config {

/// Bad or missing configuration; `key()` is "section.key" (or the file).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& msg) : std::runtime_error(key + ": " + msg), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

inline std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Parses one number, rejecting trailing garbage.
inline std::optional<double> to_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

class Section {
 public:
  Section(std::string name, boost::property_tree::ptree tree, std::set<std::string> allowed)
      : name_(std::move(name)), tree_(std::move(tree)) {
    for (const auto& [k, v] : tree_) {
      if (!v.empty()) throw ConfigError(qualified(k), "nested keys are not supported");
      if (!allowed.count(k)) throw ConfigError(qualified(k), "unknown key");
    }
  }

  std::string qualified(const std::string& key) const { return name_ + "." + key; }

  bool has(const std::string& key) const { return tree_.find(key) != tree_.not_found(); }

  std::string str(const std::string& key, const std::string& fallback) const {
    const auto v = tree_.get_optional<std::string>(key);
    return v ? trim(*v) : fallback;
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const auto v = to_number(str(key, ""));
    if (!v) throw ConfigError(qualified(key), "expected a number, got '" + str(key, "") + "'");
    return *v;
  }

  long integer(const std::string& key, long fallback, long min_value = std::numeric_limits<long>::min()) const {
    const double v = number(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw ConfigError(qualified(key), "expected an integer");
    if (v < static_cast<double>(min_value)) throw ConfigError(qualified(key), "must be >= " + std::to_string(min_value));
    return static_cast<long>(v);
  }

  /// Comma list whose items are numbers or inclusive start:step:stop ranges.
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& item : split(str(key, ""))) {
      const auto parts = split(item, ':');
      if (parts.size() == 1) {
        const auto v = to_number(parts[0]);
        if (!v) throw ConfigError(qualified(key), "bad number '" + item + "'");
        out.push_back(*v);
        continue;
      }
      if (parts.size() != 3) throw ConfigError(qualified(key), "ranges are start:step:stop, got '" + item + "'");
      const auto a = to_number(parts[0]), st = to_number(parts[1]), b = to_number(parts[2]);
      if (!a || !st || !b || !(*st > 0.0) || *b < *a) throw ConfigError(qualified(key), "bad range '" + item + "'");
      const auto n = static_cast<long>(std::floor((*b - *a) / *st + 1e-9));
      for (long i = 0; i <= n; ++i) out.push_back(*a + static_cast<double>(i) * *st);
    }
    if (out.empty()) throw ConfigError(qualified(key), "list is empty");
    return out;
  }

  std::vector<std::string> strings(const std::string& key, std::vector<std::string> fallback) const {
    if (!has(key)) return fallback;
    auto out = split(str(key, ""));
    if (out.empty()) throw ConfigError(qualified(key), "list is empty");
    return out;
  }

  const std::string& name() const { return name_; }

 private:
  std::string name_;
  boost::property_tree::ptree tree_;
};

/// Parsed INI file with the raw text kept for provenance hashing.
class File {
 public:
  static File load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path, "cannot open config file");
    std::stringstream ss;
    ss << in.rdbuf();
    File f = parse(ss.str(), path);
    f.dir_ = std::filesystem::path(path).parent_path();
    return f;
  }

  static File parse(const std::string& text, const std::string& origin = "<config>") {
    File f;
    f.text_ = text;
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, f.tree_);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(origin, "line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [k, v] : f.tree_)
      if (v.empty() && !v.data().empty()) throw ConfigError(k, "keys must live inside a [section]");
    return f;
  }

  /// Section `name` restricted to `allowed` keys; empty when absent.
  Section section(const std::string& name, std::set<std::string> allowed) const {
    const auto it = tree_.find(name);
    return Section(name, it == tree_.not_found() ? boost::property_tree::ptree{} : it->second, std::move(allowed));
  }

  bool has_section(const std::string& name) const { return tree_.find(name) != tree_.not_found(); }
  const std::string& text() const { return text_; }

  /// Paths in the file are relative to the file's directory.
  std::string resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() || dir_.empty() ? p : (dir_ / path).string();
  }

 private:
  boost::property_tree::ptree tree_;
  std::string text_;
  std::filesystem::path dir_;
};

}  // namespace nrma::config
