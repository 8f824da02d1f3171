#pragma once

#include <vector>

#include "gbpfusion/forecast/models.hpp"
#include "gbpfusion/scenario/measurements.hpp"

namespace gbpfusion::forecast {

/// Per-bus models and their predictions over a horizon.
struct BusForecasts {
  scenario::ForecastSet set;  // x2 order
  std::vector<DemandModel> demand_models;
  std::vector<SolarModel> solar_models;
  std::size_t extrapolated_hours = 0;
  std::size_t clamped_values = 0;
  /// Mean absolute percentage error of the demand forecasts against the
  /// profile truth over the horizon (soft benchmark only).
  double demand_mape = 0.0;
};

inline DemandCovariates demand_covariates(const scenario::WeatherSeries& w, scenario::HourWindow win) {
  DemandCovariates c;
  c.timestamps.assign(w.timestamps.begin() + static_cast<long>(win.begin), w.timestamps.begin() + static_cast<long>(win.end()));
  c.t_mean = w.t_mean.segment(static_cast<Index>(win.begin), static_cast<Index>(win.count));
  c.t_max = w.t_max.segment(static_cast<Index>(win.begin), static_cast<Index>(win.count));
  return c;
}

inline SolarCovariates solar_covariates(const scenario::WeatherSeries& w, scenario::HourWindow win) {
  return {w.dni.segment(static_cast<Index>(win.begin), static_cast<Index>(win.count)),
          w.dhi.segment(static_cast<Index>(win.begin), static_cast<Index>(win.count))};
}

/// Fit one demand and one solar model per load bus on `train` hours of the
/// profile truth and predict `horizon`.
inline BusForecasts build_bus_forecasts(const scenario::ProfileSet& profiles, const scenario::WeatherSeries& weather,
                                        scenario::HourWindow train, scenario::HourWindow horizon,
                                        const FitOptions& options = {}) {
  weather.validate();
  if (weather.timestamps != profiles.timestamps) throw ConfigError("weather does not cover the profile horizon hour by hour");
  if (train.end() > profiles.size() || horizon.end() > profiles.size()) throw ConfigError("forecast window exceeds the horizon");
  const auto dtrain = demand_covariates(weather, train);
  const auto strain = solar_covariates(weather, train);
  const auto dpred = demand_covariates(weather, horizon);
  const auto spred = solar_covariates(weather, horizon);
  const Index m = profiles.per_bus_demand.cols();
  const auto rows = static_cast<Index>(horizon.count);

  BusForecasts out;
  out.set.mean.resize(rows, 2 * m);
  out.set.variance.resize(rows, 2 * m);
  std::vector<char> extrapolated(horizon.count, 0);
  double ape = 0.0;
  for (Index k = 0; k < m; ++k) {
    const Vector d = profiles.per_bus_demand.col(k).segment(static_cast<Index>(train.begin), static_cast<Index>(train.count));
    const Vector s = profiles.per_bus_solar.col(k).segment(static_cast<Index>(train.begin), static_cast<Index>(train.count));
    out.demand_models.push_back(fit_demand_model(dtrain, d, options));
    out.solar_models.push_back(fit_solar_model(strain, s, options));
    const Prediction pd = out.demand_models.back().predict(dpred);
    const Prediction ps = out.solar_models.back().predict(spred);
    out.set.mean.col(2 * k) = pd.mean;
    out.set.variance.col(2 * k) = pd.variance;
    out.set.mean.col(2 * k + 1) = ps.mean;
    out.set.variance.col(2 * k + 1) = ps.variance;
    for (std::size_t r = 0; r < horizon.count; ++r) {
      extrapolated[r] = extrapolated[r] || pd.extrapolated[r] || ps.extrapolated[r];
      out.clamped_values += ps.clamped[r] ? 1 : 0;
      const double truth = profiles.per_bus_demand(static_cast<Index>(horizon.begin + r), k);
      ape += std::abs(pd.mean(static_cast<Index>(r)) - truth) / std::abs(truth);
    }
  }
  out.extrapolated_hours = fusion::HourlyEvidence::count(extrapolated);
  out.demand_mape = rows > 0 ? 100.0 * ape / static_cast<double>(rows * m) : 0.0;
  return out;
}

}  // namespace gbpfusion::forecast
