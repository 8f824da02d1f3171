#pragma once

// Bundled synthetic stand-ins for national load / solar series and weather.
//
// Weather: daily mean temperature follows a seasonal curve plus an AR(1)
// anomaly; daily max adds a sunshine-dependent spread. Irradiance comes from
// a clear-sky model at the configured site, attenuated by a daily clearness
// index with hourly jitter. National solar is a PV-like conversion of the
// irradiance. National net load = gross demand (daily and weekly shape plus
// a cooling/heating term and AR(1) noise) minus national solar.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "gbpfusion/scenario/rng.hpp"
#include "gbpfusion/scenario/time.hpp"

namespace gbpfusion::scenario {

struct WeatherSeries {
  std::vector<Timestamp> timestamps;
  Vector t_mean;  // degC, constant over a day
  Vector t_max;   // degC, constant over a day
  Vector dni;     // W/m2
  Vector dhi;     // W/m2

  std::size_t size() const { return timestamps.size(); }
  void validate() const {
    const auto n = static_cast<Index>(timestamps.size());
    if (t_mean.size() != n || t_max.size() != n || dni.size() != n || dhi.size() != n) {
      throw ConfigError("weather series columns are not aligned");
    }
  }
};

/// National series in arbitrary units (e.g. GW).
struct NationalSeries {
  std::vector<Timestamp> timestamps;
  Vector load;   // net of distributed solar
  Vector solar;

  std::size_t size() const { return timestamps.size(); }
  void validate() const {
    const auto n = static_cast<Index>(timestamps.size());
    if (load.size() != n || solar.size() != n) throw ConfigError("national series are not aligned");
  }
};

struct SyntheticOptions {
  double latitude_deg = 51.0;
  double longitude_deg = 10.0;
  double gross_load_base = 55.0;      // mean gross demand level
  double gross_load_daily = 12.0;     // day/night swing
  double weekend_factor = 0.85;       // Saturday and Sunday scale
  double load_noise_sd = 0.8;         // AR(1) innovation
  double solar_capacity = 45.0;       // national PV at 1000 W/m2 plane irradiance
  double solar_noise_sd = 0.03;       // relative
};

namespace detail {

/// Sine of the solar elevation angle (negative at night).
inline double sin_elevation(Timestamp t, double lat_deg, double lon_deg) {
  const double pi = std::numbers::pi;
  const double doy = day_of_year(t);
  const double decl = 23.44 * pi / 180.0 * std::sin(2.0 * pi * (284.0 + doy) / 365.0);
  const double solar_hour = fractional_hour(t) + 0.5 + lon_deg / 15.0;  // mid-hour
  const double hour_angle = (solar_hour - 12.0) * 15.0 * pi / 180.0;
  const double lat = lat_deg * pi / 180.0;
  return std::sin(lat) * std::sin(decl) + std::cos(lat) * std::cos(decl) * std::cos(hour_angle);
}

/// Gross demand shape over the day (0 at night trough, ~1 at evening peak).
inline double daily_shape(double hour) {
  const double pi = std::numbers::pi;
  const double morning = std::exp(-0.5 * std::pow((hour - 9.0) / 2.5, 2));
  const double evening = std::exp(-0.5 * std::pow((hour - 19.0) / 2.5, 2));
  const double day = 0.5 * (1.0 - std::cos(2.0 * pi * hour / 24.0));
  return 0.45 * day + 0.35 * morning + 0.45 * evening;
}

}  // namespace detail

inline WeatherSeries generate_weather(const std::vector<Timestamp>& ts, std::uint64_t seed,
                                      const SyntheticOptions& opt = {}) {
  require_hourly(ts);
  WeatherSeries w;
  w.timestamps = ts;
  const auto n = static_cast<Index>(ts.size());
  w.t_mean.resize(n);
  w.t_max.resize(n);
  w.dni.resize(n);
  w.dhi.resize(n);

  std::mt19937_64 rng(derive_seed(seed, 0x77656174ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double anomaly = 0.0;
  double clearness = 0.7;
  long current_day = std::numeric_limits<long>::min();
  double tm = 0.0, tx = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Timestamp t = ts[static_cast<std::size_t>(i)];
    const long day = std::chrono::floor<std::chrono::days>(t).time_since_epoch().count();
    if (day != current_day) {
      current_day = day;
      anomaly = 0.7 * anomaly + 2.0 * normal(rng);
      // Clearness persists a little from day to day.
      clearness = std::clamp(0.5 * clearness + 0.5 * (0.25 + 0.75 * unit(rng)), 0.15, 1.0);
      const double seasonal = 10.0 - 9.0 * std::cos(2.0 * std::numbers::pi * (day_of_year(t) - 15.0) / 365.0);
      tm = seasonal + anomaly;
      tx = tm + 3.0 + 6.0 * clearness + 0.5 * normal(rng);
    }
    w.t_mean(i) = tm;
    w.t_max(i) = tx;
    const double se = detail::sin_elevation(t, opt.latitude_deg, opt.longitude_deg);
    if (se <= 0.0) {
      w.dni(i) = 0.0;
      w.dhi(i) = 0.0;
      continue;
    }
    const double k = std::clamp(clearness + 0.08 * normal(rng), 0.05, 1.0);
    const double clear_dni = 950.0 * std::exp(-0.14 / std::max(se, 0.05));
    w.dni(i) = std::max(0.0, clear_dni * std::pow(k, 1.5));
    w.dhi(i) = std::max(0.0, (60.0 + 260.0 * k * (1.0 - k)) * std::pow(se, 0.8));
  }
  return w;
}

/// National solar and net load driven by `weather`.
inline NationalSeries generate_national_series(const WeatherSeries& weather, std::uint64_t seed,
                                               const SyntheticOptions& opt = {}) {
  weather.validate();
  NationalSeries s;
  s.timestamps = weather.timestamps;
  const auto n = static_cast<Index>(weather.size());
  s.load.resize(n);
  s.solar.resize(n);
  std::mt19937_64 rng(derive_seed(seed, 0x6c6f6164ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  double ar = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Timestamp t = weather.timestamps[static_cast<std::size_t>(i)];
    const double se = std::max(0.0, detail::sin_elevation(t, opt.latitude_deg, opt.longitude_deg));
    const double plane = weather.dni(i) * se + weather.dhi(i);
    const double solar = se > 0.0 ? opt.solar_capacity * plane / 1000.0 * (1.0 + opt.solar_noise_sd * normal(rng)) : 0.0;
    s.solar(i) = std::max(0.0, solar);

    const int dow = day_of_week(t);
    const double weekly = dow >= 5 ? opt.weekend_factor : (dow == 0 || dow == 4 ? 0.97 : 1.0);
    const double cooling = 0.6 * std::max(0.0, weather.t_max(i) - 24.0);
    const double heating = 0.5 * std::max(0.0, 12.0 - weather.t_mean(i));
    ar = 0.8 * ar + opt.load_noise_sd * normal(rng);
    const double gross =
        weekly * (opt.gross_load_base + opt.gross_load_daily * detail::daily_shape(fractional_hour(t))) + cooling +
        heating + ar;
    s.load(i) = gross - s.solar(i);
  }
  return s;
}

}  // namespace gbpfusion::scenario
