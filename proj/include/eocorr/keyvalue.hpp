#pragma once

// Minimal "key = value" text format with [section] headers and '#' comments.
// Used for both material files and scenario files. Entry order and repeated
// keys are preserved, which table-valued sections rely on.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eocorr/errors.hpp"

namespace eocorr::kv {

struct Entry {
  std::string key;
  std::string value;
  int line = 0;
};

struct Section {
  std::string name;  // empty for the header block before the first [section]
  std::vector<Entry> entries;
  int line = 0;

  const Entry* find(std::string_view key) const {
    for (const auto& e : entries)
      if (e.key == key) return &e;
    return nullptr;
  }
};

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

class Document {
 public:
  std::vector<Section> sections;

  const Section* section(std::string_view name) const {
    for (const auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  }

  const Section& require_section(std::string_view name) const {
    if (const auto* s = section(name)) return *s;
    throw validation_error("missing section [" + std::string(name) + "]", 0, std::string(name));
  }

  /// Schema string from the header block ("schema = ...").
  std::string schema() const {
    if (sections.empty() || !sections.front().name.empty()) return {};
    const auto* e = sections.front().find("schema");
    return e ? e->value : std::string{};
  }
};

inline Document parse(std::string_view text) {
  Document doc;
  doc.sections.push_back(Section{"", {}, 0});
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view view = raw;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    std::string line = trim(view);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw validation_error("malformed section header '" + line + "'", line_no);
      std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      for (const auto& s : doc.sections)
        if (s.name == name) throw validation_error("duplicate section [" + name + "]", line_no, name);
      doc.sections.push_back(Section{name, {}, line_no});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw validation_error("expected 'key = value', got '" + line + "'", line_no);
    std::string key = trim(std::string_view(line).substr(0, eq));
    std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw validation_error("empty key", line_no);
    doc.sections.back().entries.push_back(Entry{key, value, line_no});
  }
  return doc;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot open file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline double to_double(const Entry& e) {
  const std::string& v = e.value;
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw validation_error("field '" + e.key + "': not a number: '" + v + "'", e.line, e.key);
  return out;
}

inline std::vector<double> to_doubles(const Entry& e) {
  std::vector<double> out;
  std::string_view rest = e.value;
  while (!rest.empty()) {
    auto comma = rest.find(',');
    std::string item = trim(rest.substr(0, comma));
    if (item.empty())
      throw validation_error("field '" + e.key + "': empty list element", e.line, e.key);
    out.push_back(to_double(Entry{e.key, item, e.line}));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

inline bool to_bool(const Entry& e) {
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw validation_error("field '" + e.key + "': expected boolean, got '" + e.value + "'", e.line,
                         e.key);
}

inline unsigned long long to_u64(const Entry& e) {
  unsigned long long out = 0;
  const std::string& v = e.value;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw validation_error("field '" + e.key + "': expected unsigned integer, got '" + v + "'",
                           e.line, e.key);
  return out;
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

}  // namespace eocorr::kv
