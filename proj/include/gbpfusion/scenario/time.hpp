#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "gbpfusion/core/errors.hpp"

namespace gbpfusion::scenario {

/// UTC instant with one-second resolution.
using Timestamp = std::chrono::sys_seconds;

/// Accepts "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace the 'T').
inline Timestamp parse_timestamp(std::string_view text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const std::string buf(text);
  const int got = std::sscanf(buf.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (got < 6 || (sep != 'T' && sep != ' ')) throw ConfigError("bad timestamp '" + buf + "'");
  std::string_view rest = std::string_view(buf).substr(static_cast<std::size_t>(consumed));
  if (rest.starts_with(":")) {
    int used = 0;
    if (std::sscanf(buf.c_str() + consumed, ":%2d%n", &s, &used) != 1) throw ConfigError("bad timestamp '" + buf + "'");
    rest.remove_prefix(static_cast<std::size_t>(used));
  }
  if (rest == "Z" || rest == "+00:00") rest = {};
  if (!rest.empty()) throw ConfigError("bad timestamp '" + buf + "' (only UTC is supported)");
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
    throw ConfigError("timestamp out of range '" + buf + "'");
  }
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

/// "YYYY-MM-DDTHH:MM:SSZ".
inline std::string format_timestamp(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{t - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ldZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

inline int hour_of_day(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  return static_cast<int>(std::chrono::duration_cast<std::chrono::hours>(t - day).count());
}

/// Fractional hour of day in [0, 24).
inline double fractional_hour(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  return std::chrono::duration<double, std::ratio<3600>>(t - day).count();
}

/// 0 = Monday ... 6 = Sunday.
inline int day_of_week(Timestamp t) {
  const std::chrono::weekday wd{std::chrono::floor<std::chrono::days>(t)};
  return static_cast<int>(wd.iso_encoding()) - 1;
}

/// 1-based day of the year.
inline int day_of_year(Timestamp t) {
  const auto day = std::chrono::floor<std::chrono::days>(t);
  const std::chrono::year_month_day ymd{day};
  const auto jan1 = std::chrono::sys_days{ymd.year() / std::chrono::January / 1};
  return static_cast<int>((day - jan1).count()) + 1;
}

inline std::vector<Timestamp> hourly_range(Timestamp start, std::size_t hours) {
  std::vector<Timestamp> out;
  out.reserve(hours);
  for (std::size_t i = 0; i < hours; ++i) out.push_back(start + std::chrono::hours{static_cast<long>(i)});
  return out;
}

/// Throws unless `ts` is strictly hourly.
inline void require_hourly(const std::vector<Timestamp>& ts) {
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if (ts[i] - ts[i - 1] != std::chrono::hours{1}) {
      throw ConfigError("series is not hourly at " + format_timestamp(ts[i]));
    }
  }
}

}  // namespace gbpfusion::scenario
