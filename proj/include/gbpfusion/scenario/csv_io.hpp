#pragma once

// Plain comma-separated files, one header row, no quoting.
//
// Time series (long format):   timestamp,series,value
// Weather (wide format):       timestamp,temperature_mean_C,temperature_max_C,dni_Wm2,dhi_Wm2

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "gbpfusion/scenario/synthetic.hpp"

namespace gbpfusion::scenario {

namespace csv {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(const std::string& s, std::size_t line, std::size_t column) {
  double v = 0.0;
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  const auto res = std::from_chars(b, e, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != e) throw ParseError("bad number '" + s + "'", line, column);
  return v;
}

inline Timestamp parse_time(const std::string& s, std::size_t line) {
  try {
    return parse_timestamp(s);
  } catch (const ConfigError& e) {
    throw ParseError(e.what(), line, 1);
  }
}

/// 17 significant digits, so the value reads back bit-exact.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Reads rows after a header that must equal `header`; calls row(fields,
/// line) for each non-empty line.
template <class RowFn>
void read_rows(std::istream& in, const std::vector<std::string>& header, RowFn row) {
  std::string line;
  std::size_t n = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (!seen_header) {
      if (fields != header) {
        std::string want;
        for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
        throw ParseError("expected header '" + want + "'", n, 1);
      }
      seen_header = true;
      continue;
    }
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()), n);
    }
    row(fields, n);
  }
  if (!seen_header) throw ParseError("empty file", n == 0 ? 1 : n);
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return in;
}

}  // namespace csv

/// Several hourly series over one common time axis.
struct TimeSeriesTable {
  std::vector<Timestamp> timestamps;
  std::map<std::string, Vector> series;

  const Vector& at(const std::string& name) const {
    const auto it = series.find(name);
    if (it == series.end()) throw ConfigError("series '" + name + "' not found");
    return it->second;
  }
};

inline TimeSeriesTable read_timeseries_csv(std::istream& in) {
  std::map<std::string, std::map<Timestamp, double>> raw;
  std::map<std::string, std::size_t> first_line;
  csv::read_rows(in, {"timestamp", "series", "value"}, [&](const std::vector<std::string>& f, std::size_t line) {
    const Timestamp t = csv::parse_time(f[0], line);
    if (f[1].empty()) throw ParseError("empty series name", line, 2);
    const double v = csv::parse_number(f[2], line, 3);
    auto& s = raw[f[1]];
    if (!s.emplace(t, v).second) throw ParseError("duplicate row for " + f[1] + " at " + f[0], line);
    first_line.emplace(f[1], line);
  });
  TimeSeriesTable table;
  if (raw.empty()) return table;
  for (const auto& [name, values] : raw) {
    std::vector<Timestamp> ts;
    Vector v(static_cast<Index>(values.size()));
    Index i = 0;
    for (const auto& [t, x] : values) {
      ts.push_back(t);
      v(i++) = x;
    }
    try {
      require_hourly(ts);
    } catch (const ConfigError& e) {
      throw ParseError("series " + name + ": " + e.what(), first_line[name]);
    }
    if (table.series.empty()) {
      table.timestamps = ts;
    } else if (ts != table.timestamps) {
      throw ParseError("series " + name + " does not share the time axis of the other series", first_line[name]);
    }
    table.series.emplace(name, std::move(v));
  }
  return table;
}

inline TimeSeriesTable read_timeseries_csv(const std::string& path) {
  auto in = csv::open_input(path);
  return read_timeseries_csv(in);
}

/// Rows ordered by series name, then time.
inline void write_timeseries_csv(std::ostream& out, const TimeSeriesTable& table) {
  out << "timestamp,series,value\n";
  for (const auto& [name, v] : table.series) {
    if (v.size() != static_cast<Index>(table.timestamps.size())) throw ConfigError("series " + name + " is not aligned");
    for (Index i = 0; i < v.size(); ++i) {
      out << format_timestamp(table.timestamps[static_cast<std::size_t>(i)]) << ',' << name << ','
          << csv::format_number(v(i)) << '\n';
    }
  }
}

/// National load and solar from a time-series file with series "load" and
/// "solar".
inline NationalSeries national_from_table(const TimeSeriesTable& table) {
  NationalSeries s;
  s.timestamps = table.timestamps;
  s.load = table.at("load");
  s.solar = table.at("solar");
  return s;
}

inline TimeSeriesTable table_from_national(const NationalSeries& s) {
  s.validate();
  TimeSeriesTable t;
  t.timestamps = s.timestamps;
  t.series["load"] = s.load;
  t.series["solar"] = s.solar;
  return t;
}

inline const std::vector<std::string>& weather_header() {
  static const std::vector<std::string> h{"timestamp", "temperature_mean_C", "temperature_max_C", "dni_Wm2", "dhi_Wm2"};
  return h;
}

inline WeatherSeries read_weather_csv(std::istream& in) {
  WeatherSeries w;
  std::vector<double> cols[4];
  csv::read_rows(in, weather_header(), [&](const std::vector<std::string>& f, std::size_t line) {
    w.timestamps.push_back(csv::parse_time(f[0], line));
    for (std::size_t c = 0; c < 4; ++c) cols[c].push_back(csv::parse_number(f[c + 1], line, c + 2));
    if (w.timestamps.size() > 1 && w.timestamps.back() - w.timestamps[w.timestamps.size() - 2] != std::chrono::hours{1}) {
      throw ParseError("weather rows are not consecutive hours", line, 1);
    }
  });
  auto to_vec = [](const std::vector<double>& v) {
    return Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
  };
  w.t_mean = to_vec(cols[0]);
  w.t_max = to_vec(cols[1]);
  w.dni = to_vec(cols[2]);
  w.dhi = to_vec(cols[3]);
  return w;
}

inline WeatherSeries read_weather_csv(const std::string& path) {
  auto in = csv::open_input(path);
  return read_weather_csv(in);
}

inline void write_weather_csv(std::ostream& out, const WeatherSeries& w) {
  w.validate();
  const auto& h = weather_header();
  out << h[0] << ',' << h[1] << ',' << h[2] << ',' << h[3] << ',' << h[4] << '\n';
  for (std::size_t i = 0; i < w.size(); ++i) {
    const auto r = static_cast<Index>(i);
    out << format_timestamp(w.timestamps[i]) << ',' << csv::format_number(w.t_mean(r)) << ','
        << csv::format_number(w.t_max(r)) << ',' << csv::format_number(w.dni(r)) << ','
        << csv::format_number(w.dhi(r)) << '\n';
  }
}

}  // namespace gbpfusion::scenario
