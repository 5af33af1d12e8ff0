#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "pcc/errors.hpp"

// Key-value run configuration shared by every command. Values come from
// an optional `key = value` file ('#' starts a comment), then from flag
// overrides, flags winning. Every lookup records the effective value,
// including applied defaults, so a run can write back exactly the
// configuration it ran with.

namespace pcc {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

inline std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace detail

class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
      if (cfg.values_.count(key))
        throw ConfigError(path + ":" + std::to_string(line_no) +
                          ": duplicate key '" + key + "'");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  // Flag override; replaces any file-provided value.
  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) {
    return raw(key, fallback);
  }

  std::string require_string(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw ConfigError("missing required config key '" + key + "'");
    consumed_.insert(key);
    resolved_[key] = it->second;
    return it->second;
  }

  int get_int(const std::string& key, int fallback) {
    return parse_integral<int>(raw(key, std::to_string(fallback)), key);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    return parse_integral<std::uint64_t>(raw(key, std::to_string(fallback)),
                                         key);
  }

  double get_double(const std::string& key, double fallback) {
    const std::string text = raw(key, detail::format_double(fallback));
    std::istringstream ss(text);
    double v = 0.0;
    char extra = 0;
    if (!(ss >> v) || ss >> extra)
      throw ConfigError("config key '" + key + "': not a number: " + text);
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) {
    const std::string text = raw(key, fallback ? "on" : "off");
    if (text == "on" || text == "true" || text == "1") return true;
    if (text == "off" || text == "false" || text == "0") return false;
    throw ConfigError("config key '" + key + "': expected on|off, got " + text);
  }

  // Call after a command has read everything it understands.
  void reject_unknown() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
      if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty())
      throw ConfigError("unknown config keys: " + unknown);
  }

  // The effective configuration: one sorted `key = value` line per key the
  // command consulted, defaults included.
  std::string resolved_text() const {
    std::string text;
    for (const auto& [key, value] : resolved_)
      text += key + " = " + value + "\n";
    return text;
  }

  std::uint64_t resolved_hash() const {
    return detail::fnv1a(resolved_text());
  }

 private:
  // Effective raw value: explicit setting if present, else the recorded
  // default. Defaults stick, so repeated reads stay consistent.
  std::string raw(const std::string& key, const std::string& fallback) {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it != values_.end()) {
      resolved_[key] = it->second;
      return it->second;
    }
    const auto prior = resolved_.find(key);
    if (prior != resolved_.end()) return prior->second;
    resolved_[key] = fallback;
    return fallback;
  }

  template <typename T>
  T parse_integral(const std::string& text, const std::string& key) {
    T v{};
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc{} || res.ptr != end)
      throw ConfigError("config key '" + key + "': not an integer: " + text);
    return v;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
  std::map<std::string, std::string> resolved_;
};

}  // namespace pcc
