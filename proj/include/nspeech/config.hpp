#pragma once

// Flat configuration registry with dotted keys. Every key is declared up
// front with a default and a doc line; values can then come from a plain-text
// config file (`key = value`, '#' comments) and from command-line overrides
// (`key=value`). Referencing an undeclared key is an error, which catches
// typos in both files and overrides. The full set of keys, defaults, current
// values, and their sources can be rendered for --help and for report
// provenance.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "nspeech/common.hpp"

namespace nspeech {

class ConfigRegistry {
 public:
  void define(const std::string& key, const std::string& default_value, const std::string& doc) {
    if (index_.count(key)) throw ConfigError("config: key declared twice: " + key);
    index_[key] = entries_.size();
    entries_.push_back({key, default_value, doc, default_value, "default"});
  }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string& get(const std::string& key) const { return entry(key).value; }

  double get_double(const std::string& key) const {
    const std::string& s = get(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("config: " + key + " expects a number, got '" + s + "'");
    return v;
  }

  long long get_int(const std::string& key) const {
    const std::string& s = get(key);
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("config: " + key + " expects an integer, got '" + s + "'");
    return v;
  }

  uint64_t get_u64(const std::string& key) const {
    long long v = get_int(key);
    if (v < 0) throw ConfigError("config: " + key + " expects a non-negative integer");
    return static_cast<uint64_t>(v);
  }

  bool get_bool(const std::string& key) const {
    const std::string& s = get(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config: " + key + " expects true/false, got '" + s + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    for (const std::string& piece : split(get(key), ',')) {
      std::string t = trim(piece);
      if (!t.empty()) out.push_back(t);
    }
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const std::string& piece : get_list(key)) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), v);
      if (ec != std::errc() || p != piece.data() + piece.size())
        throw ConfigError("config: " + key + " expects numbers, got '" + piece + "'");
      out.push_back(v);
    }
    return out;
  }

  void set(const std::string& key, const std::string& value, const std::string& source) {
    entry(key).value = value;
    entry(key).source = source;
  }

  // One `key=value` fragment, as passed to --set.
  void apply_override(const std::string& fragment) {
    size_t eq = fragment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override must look like key=value: '" + fragment + "'");
    set(trim(fragment.substr(0, eq)), trim(fragment.substr(eq + 1)), "override");
  }

  void load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open file: " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
      try {
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)), path);
      } catch (const ConfigError& e) {
        throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  // Every key with its default and doc line, for --help.
  std::string help() const {
    std::ostringstream out;
    for (const Entry& e : entries_)
      out << "  " << e.key << " (default: " << e.default_value << ")\n      " << e.doc << "\n";
    return out.str();
  }

  // Every key with its effective value and where it came from, for report
  // metadata.
  std::string provenance() const {
    std::ostringstream out;
    for (const Entry& e : entries_)
      out << e.key << " = " << e.value << "  [" << e.source << "]\n";
    return out.str();
  }

  std::vector<std::pair<std::string, std::string>> items() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const Entry& e : entries_) out.emplace_back(e.key, e.value);
    return out;
  }

 private:
  struct Entry {
    std::string key;
    std::string default_value;
    std::string doc;
    std::string value;
    std::string source;
  };

  Entry& entry(const std::string& key) {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("config: unknown key '" + key + "'");
    return entries_[it->second];
  }
  const Entry& entry(const std::string& key) const {
    return const_cast<ConfigRegistry*>(this)->entry(key);
  }

  std::vector<Entry> entries_;  // declaration order, for stable help output
  std::map<std::string, size_t> index_;
};

}  // namespace nspeech
