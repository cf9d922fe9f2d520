#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "eocorr/errors.hpp"

namespace eocorr {

using json = nlohmann::json;

/// Throws unless `delays` is strictly increasing with constant spacing.
inline void require_uniform_grid(std::span<const double> delays, const char* who) {
  if (delays.size() < 2) throw validation_error(std::string(who) + ": grid needs at least 2 points");
  const double step = delays[1] - delays[0];
  if (!(step > 0.0)) throw validation_error(std::string(who) + ": grid must be strictly increasing");
  const double tol = 1e-6 * step;
  for (std::size_t i = 1; i < delays.size(); ++i) {
    if (std::abs((delays[i] - delays[i - 1]) - step) > tol)
      throw validation_error(std::string(who) + ": grid is not uniform at index " + std::to_string(i));
  }
}

/// `points` samples from start to stop inclusive.
inline std::vector<double> uniform_grid(double start, double stop, std::size_t points) {
  if (points < 2) throw validation_error("uniform_grid: need at least 2 points");
  std::vector<double> g(points);
  const double step = (stop - start) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = start + step * static_cast<double>(i);
  return g;
}

/// Balanced-detector output versus delay (classical third-order signal).
struct SignalTrace {
  std::vector<double> delays;  // s
  std::vector<double> values;  // V
  double integration_time_per_point = 0.0;
  std::string scenario_id;
};

/// Sampled G1(tau) at fixed separation, V^2/m^2.
struct CorrelationTrace {
  std::vector<double> delays;          // s
  std::vector<double> values;          // V^2/m^2
  std::vector<double> standard_error;  // empty for analytic traces
  double delta_r = 0.0;                // m
  json metadata = json::object();

  bool has_errors() const { return !standard_error.empty(); }
};

template <class T>
concept UniformTrace = requires(const T& t) {
  { t.delays } -> std::convertible_to<std::vector<double>>;
  { t.values } -> std::convertible_to<std::vector<double>>;
};

inline std::string format_e(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12e", x);
  return buf;
}

inline std::string signal_trace_csv(const SignalTrace& t) {
  std::string out = "delay_fs,signal_V\n";
  for (std::size_t i = 0; i < t.delays.size(); ++i)
    out += format_e(t.delays[i] * 1e15) + "," + format_e(t.values[i]) + "\n";
  return out;
}

inline std::string correlation_trace_csv(const CorrelationTrace& t) {
  std::string out = t.has_errors() ? "tau_fs,g1_V2_per_m2,se_V2_per_m2\n" : "tau_fs,g1_V2_per_m2\n";
  for (std::size_t i = 0; i < t.delays.size(); ++i) {
    out += format_e(t.delays[i] * 1e15) + "," + format_e(t.values[i]);
    if (t.has_errors()) out += "," + format_e(t.standard_error[i]);
    out += "\n";
  }
  return out;
}

/// Generic numeric CSV: header row plus rows of doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
};

inline CsvTable parse_csv(const std::string& text, const std::string& name = "csv") {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) parts.push_back(item);
    return parts;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto parts = split(line);
    if (table.header.empty()) {
      table.header = parts;
      table.columns.resize(parts.size());
      continue;
    }
    if (parts.size() != table.header.size())
      throw validation_error(name + ": wrong column count", line_no);
    for (std::size_t c = 0; c < parts.size(); ++c) {
      try {
        std::size_t used = 0;
        table.columns[c].push_back(std::stod(parts[c], &used));
      } catch (const std::exception&) {
        throw validation_error(name + ": not a number '" + parts[c] + "'", line_no);
      }
    }
  }
  if (table.header.empty()) throw validation_error(name + ": empty file");
  return table;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

}  // namespace eocorr
