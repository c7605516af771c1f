#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/util.hpp"

namespace dakit {

// Flat `key = value` configuration, one entry per line, `#` starts a
// comment, blank lines ignored. Keys may be dotted (`meas.interval`).
// Serialization is canonical (sorted keys, one space around `=`), so a
// config written, reloaded, and rewritten is byte-identical.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(const std::string& text,
                              const std::string& origin = "<string>") {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t nl = text.find('\n', pos);
      std::string line = text.substr(
          pos, nl == std::string::npos ? std::string::npos : nl - pos);
      pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string_view body = trim(line);
      if (body.empty()) continue;
      const std::size_t eq = body.find('=');
      if (eq == std::string_view::npos)
        throw ParseError(origin, line_no, "expected 'key = value'");
      const std::string key(trim(body.substr(0, eq)));
      const std::string value(trim(body.substr(eq + 1)));
      if (key.empty())
        throw ParseError(origin, line_no, "empty key");
      if (cfg.entries_.count(key))
        throw ParseError(origin, line_no, "duplicate key '" + key + "'");
      cfg.entries_[key] = {value, line_no};
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    return parse(read_file(path), path);
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::string& origin() const { return origin_; }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, _] : entries_) out.push_back(k);
    return out;
  }

  std::string get_string(const std::string& key) const {
    return find(key).value;
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& key) const {
    return parse_double(key, find(key));
  }
  double get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_double(key, it->second);
  }

  std::uint64_t get_u64(const std::string& key) const {
    return parse_u64(key, find(key));
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : parse_u64(key, it->second);
  }

  // comma-separated doubles, e.g. `ic = 5, 5, 5`
  std::vector<double> get_double_list(const std::string& key) const {
    const Entry& e = find(key);
    std::vector<double> out;
    for (const std::string& part : split(e.value, ',')) {
      const std::string token(trim(part));
      const auto v = try_parse_double(token);
      if (!v)
        throw ConfigError(where(key, e) + ": '" + token +
                          "' is not a number");
      out.push_back(*v);
    }
    if (out.empty())
      throw ConfigError(where(key, e) + ": empty list");
    return out;
  }
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const {
    return has(key) ? get_double_list(key) : std::move(fallback);
  }

  // comma-separated non-negative integers, e.g. `meas.components = 0, 2`
  std::vector<std::size_t> get_index_list(const std::string& key) const {
    const Entry& e = find(key);
    std::vector<std::size_t> out;
    for (const std::string& part : split(e.value, ',')) {
      const std::string token(trim(part));
      const auto v = try_parse_u64(token);
      if (!v)
        throw ConfigError(where(key, e) + ": '" + token +
                          "' is not a non-negative integer");
      out.push_back(static_cast<std::size_t>(*v));
    }
    if (out.empty())
      throw ConfigError(where(key, e) + ": empty list");
    return out;
  }
  std::vector<std::size_t> get_index_list(const std::string& key,
                                          std::vector<std::size_t> fallback) const {
    return has(key) ? get_index_list(key) : std::move(fallback);
  }

  void set(const std::string& key, const std::string& value) {
    entries_[key] = {value, 0};
  }
  void set_double(const std::string& key, double value) {
    set(key, format_double(value));
  }
  void set_u64(const std::string& key, std::uint64_t value) {
    set(key, std::to_string(value));
  }

  // Every key must be in `allowed`; catches typos like `meas.intervall`.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, entry] : entries_)
      if (!allowed.count(key))
        throw ConfigError(where(key, entry) + ": unknown key '" + key + "'");
  }

  std::string serialize() const {
    std::string out;
    for (const auto& [key, entry] : entries_)
      out += key + " = " + entry.value + "\n";
    return out;
  }

  void save(const std::string& path) const {
    write_file_atomic(path, serialize());
  }

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;  // 0: set programmatically
  };

  const Entry& find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end())
      throw ConfigError(origin_ + ": missing required key '" + key + "'");
    return it->second;
  }

  std::string where(const std::string& key, const Entry& e) const {
    if (e.line == 0) return origin_ + ": key '" + key + "'";
    return origin_ + ":" + std::to_string(e.line);
  }

  double parse_double(const std::string& key, const Entry& e) const {
    const auto v = try_parse_double(e.value);
    if (!v)
      throw ConfigError(where(key, e) + ": '" + e.value +
                        "' is not a number (key '" + key + "')");
    return *v;
  }

  std::uint64_t parse_u64(const std::string& key, const Entry& e) const {
    const auto v = try_parse_u64(e.value);
    if (!v)
      throw ConfigError(where(key, e) + ": '" + e.value +
                        "' is not a non-negative integer (key '" + key + "')");
    return *v;
  }

  std::string origin_ = "<empty>";
  std::map<std::string, Entry> entries_;
};

}  // namespace dakit
