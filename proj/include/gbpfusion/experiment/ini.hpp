#pragma once

// Minimal INI reader: "[section]" headers, "key = value" lines, '#' or ';'
// comments. Keys before any header belong to section "". Every value keeps
// its line number so later validation can point at it.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gbpfusion/core/errors.hpp"

namespace gbpfusion::experiment {

struct IniValue {
  std::string text;
  std::size_t line = 0;
};

struct IniSection {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, IniValue> values;
};

class IniFile {
 public:
  std::string source;
  std::vector<IniSection> sections;

  const IniSection* find(const std::string& name) const {
    for (const auto& s : sections) {
      if (s.name == name) return &s;
    }
    return nullptr;
  }

  [[noreturn]] void fail(std::size_t line, const std::string& what) const { throw ParseError(source, what, line); }
};

namespace detail {

inline std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline IniFile parse_ini(const std::string& text, const std::string& source) {
  IniFile ini;
  ini.source = source;
  ini.sections.push_back({"", 0, {}});
  std::istringstream in(text);
  std::string raw;
  std::size_t n = 0;
  while (std::getline(in, raw)) {
    ++n;
    std::string line = raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::strip(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') ini.fail(n, "unterminated section header");
      const std::string name = detail::strip(line.substr(1, line.size() - 2));
      if (name.empty()) ini.fail(n, "empty section name");
      if (ini.find(name)) ini.fail(n, "duplicate section [" + name + "]");
      ini.sections.push_back({name, n, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) ini.fail(n, "expected 'key = value'");
    const std::string key = detail::strip(line.substr(0, eq));
    const std::string value = detail::strip(line.substr(eq + 1));
    if (key.empty()) ini.fail(n, "missing key before '='");
    auto& section = ini.sections.back();
    if (!section.values.emplace(key, IniValue{value, n}).second) {
      ini.fail(n, "duplicate key '" + key + "'" + (section.name.empty() ? "" : " in [" + section.name + "]"));
    }
  }
  return ini;
}

inline IniFile read_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_ini(ss.str(), path);
}

/// Typed access to one section; remembers which keys were read so unknown
/// keys can be rejected.
class SectionReader {
 public:
  SectionReader(const IniFile& ini, const IniSection* section) : ini_(ini), section_(section) {}

  bool present() const { return section_ != nullptr; }
  bool has(const std::string& key) const { return section_ && section_->values.count(key); }
  std::size_t line_of(const std::string& key) const {
    return has(key) ? section_->values.at(key).line : (section_ ? section_->line : 0);
  }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const { ini_.fail(line_of(key), what); }

  std::string text(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    return has(key) ? section_->values.at(key).text : fallback;
  }
  std::string required(const std::string& key) {
    used_.insert(key);
    if (!has(key)) ini_.fail(section_ ? section_->line : 0, "missing key '" + key + "' in [" + name() + "]");
    return section_->values.at(key).text;
  }
  double number(const std::string& key, double fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    return to_number(key, text(key, ""));
  }
  long integer(const std::string& key, long fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    const std::string t = text(key, "");
    std::size_t pos = 0;
    long v = 0;
    try {
      v = std::stol(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != t.size() || t.empty()) fail(key, "'" + key + "' must be an integer, got '" + t + "'");
    return v;
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    const std::string t = text(key, "");
    if (t == "true" || t == "yes" || t == "1") return true;
    if (t == "false" || t == "no" || t == "0") return false;
    fail(key, "'" + key + "' must be true or false, got '" + t + "'");
  }
  std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
    if (!has(key)) {
      used_.insert(key);
      return fallback;
    }
    std::vector<int> out;
    std::stringstream ss(text(key, ""));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::strip(item);
      std::size_t pos = 0;
      int v = 0;
      try {
        v = std::stoi(item, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (item.empty() || pos != item.size()) fail(key, "'" + key + "' must be a comma-separated list of integers");
      out.push_back(v);
    }
    if (out.empty()) fail(key, "'" + key + "' is empty");
    return out;
  }

  /// Throws on the first key that was never read.
  void reject_unknown() const {
    if (!section_) return;
    for (const auto& [key, value] : section_->values) {
      if (!used_.count(key)) ini_.fail(value.line, "unknown key '" + key + "' in [" + name() + "]");
    }
  }

  std::string name() const { return section_ ? section_->name : std::string(); }

 private:
  double to_number(const std::string& key, const std::string& t) const {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(t, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (t.empty() || pos != t.size()) fail(key, "'" + key + "' must be a number, got '" + t + "'");
    return v;
  }

  const IniFile& ini_;
  const IniSection* section_;
  std::set<std::string> used_;
};

}  // namespace gbpfusion::experiment
