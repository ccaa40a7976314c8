#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "driftls/errors.hpp"

namespace driftls::harness {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Flat key/value configuration. Values come from defaults, then a config
// file, then command-line overrides; later sources win.
class Config {
 public:
  Config() = default;
  explicit Config(std::set<std::string> known) : known_(std::move(known)) {}

  void set_default(const std::string& key, const std::string& value) {
    check_key(key);
    if (!values_.count(key)) values_[key] = value;
  }

  void set(const std::string& key, const std::string& value) {
    check_key(key);
    values_[key] = value;
  }

  // "key = value" lines; '#' starts a comment.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
      }
      set(normalize(trim(t.substr(0, eq))), trim(t.substr(eq + 1)));
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    return has(key) ? str(key) : fallback;
  }

  double num(const std::string& key) const { return parse_double(key, str(key)); }
  double num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

  std::uint64_t count(const std::string& key) const { return parse_u64(key, str(key)); }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }

  bool flag(const std::string& key, bool fallback = false) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "1" || v == "true" || v == "yes" || v == "on" || v.empty()) return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
  }

  std::vector<std::uint64_t> counts(const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& s : split_list(str(key))) out.push_back(parse_u64(key, s));
    return out;
  }

  std::vector<std::string> strs(const std::string& key) const { return split_list(str(key)); }

  // Seeds: `seeds` is either a count (seed, seed+1, ...) or a comma list.
  std::vector<std::uint64_t> seeds() const {
    const std::uint64_t base = count("seed", 1);
    std::vector<std::uint64_t> out;
    if (!has("seeds")) {
      out.push_back(base);
    } else if (str("seeds").find(',') != std::string::npos) {
      out = counts("seeds");
    } else {
      const std::uint64_t n = count("seeds");
      for (std::uint64_t i = 0; i < n; ++i) out.push_back(base + i);
    }
    if (out.empty()) throw ConfigError("seeds must be non-empty");
    std::sort(out.begin(), out.end());
    if (std::adjacent_find(out.begin(), out.end()) != out.end()) throw ConfigError("seeds must be distinct");
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  static std::string normalize(std::string key) {
    std::replace(key.begin(), key.end(), '-', '_');
    return key;
  }

 private:
  void check_key(const std::string& key) const {
    if (!known_.empty() && !known_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  static double parse_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
      throw ConfigError("key '" + key + "': expected a number, got '" + s + "'");
    }
    return v;
  }

  static std::uint64_t parse_u64(const std::string& key, const std::string& s) {
    // Accept 1e5-style counts as long as they are whole numbers.
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size()) return v;
    const double dv = parse_double(key, s);
    if (dv < 0.0 || dv != static_cast<double>(static_cast<std::uint64_t>(dv))) {
      throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
    }
    return static_cast<std::uint64_t>(dv);
  }

  std::set<std::string> known_;
  std::map<std::string, std::string> values_;
};

// Parses `--key=value`, `--key value` and bare `--flag` arguments into cfg.
// `--config PATH` is applied before every other override regardless of order.
inline void apply_args(Config& cfg, const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> overrides;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) throw ConfigError("unexpected argument '" + a + "'");
    std::string key = a.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
      value = args[++i];
    } else {
      value = "true";
    }
    key = Config::normalize(key);
    if (key == "config") {
      config_path = value;
    } else {
      overrides.emplace_back(key, value);
    }
  }
  if (config_path) cfg.load_file(*config_path);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
}

}  // namespace driftls::harness
