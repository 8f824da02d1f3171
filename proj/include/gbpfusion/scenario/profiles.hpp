#pragma once

#include <vector>

#include "gbpfusion/fusion/layout.hpp"
#include "gbpfusion/scenario/synthetic.hpp"

namespace gbpfusion::scenario {

/// Per-bus demand and solar in p.u., rows = hours, columns = load buses.
struct ProfileSet {
  std::vector<Timestamp> timestamps;
  Vector load_profile;
  Vector solar_profile;
  Matrix per_bus_demand;
  Matrix per_bus_solar;
  std::vector<int> load_buses;
  /// Hour whose national net load anchors the scaling.
  std::size_t peak_index = 0;
  double peak_load = 0.0;

  std::size_t size() const { return timestamps.size(); }
  Matrix per_bus_net() const { return per_bus_demand - per_bus_solar; }
  /// National net load relative to the anchor; scales loads outside x2.
  double load_scale(std::size_t hour) const { return load_profile(static_cast<Index>(hour)) / peak_load; }

  /// x2 at `hour` in the fusion layout order.
  Vector resources(std::size_t hour) const {
    const auto h = static_cast<Index>(hour);
    Vector x2(2 * per_bus_demand.cols());
    for (Index k = 0; k < per_bus_demand.cols(); ++k) {
      x2(2 * k) = per_bus_demand(h, k);
      x2(2 * k + 1) = per_bus_solar(h, k);
    }
    return x2;
  }

  /// Index of `t`; throws if absent.
  std::size_t index_of(Timestamp t) const {
    if (timestamps.empty() || t < timestamps.front() || t > timestamps.back()) {
      throw ConfigError(format_timestamp(t) + " is outside the profile horizon");
    }
    return static_cast<std::size_t>(std::chrono::duration_cast<std::chrono::hours>(t - timestamps.front()).count());
  }
};

/// Hours [begin, begin + count) of a series.
struct HourWindow {
  std::size_t begin = 0;
  std::size_t count = 0;
  std::size_t end() const { return begin + count; }
};

/// Scale national series onto the load buses.
///
/// Net load at bus i is Pd_i * L(t) / L_peak, where L_peak is the largest
/// national net load inside `peak_window` (whole series when count == 0).
/// National solar is converted with the same factor and split equally over
/// the load buses; demand = net + solar.
inline ProfileSet generate_profiles(const power::BusBranchModel& model, const NationalSeries& national,
                                    const std::vector<int>& load_buses, HourWindow peak_window = {}) {
  national.validate();
  require_hourly(national.timestamps);
  const auto T = static_cast<Index>(national.size());
  if (T == 0) throw ConfigError("empty national series");
  if (!national.load.allFinite() || !national.solar.allFinite()) throw ConfigError("national series contain missing values");
  if (national.load.minCoeff() < 0.0 || national.solar.minCoeff() < 0.0) {
    throw ConfigError("national load and solar series must be nonnegative");
  }
  if (national.load.maxCoeff() <= 0.0) throw ConfigError("national load series is all zero");
  if (peak_window.count == 0) peak_window = {0, national.size()};
  if (peak_window.end() > national.size()) throw ConfigError("peak window exceeds the series");

  const auto layout = fusion::FusionStateLayout::for_model(model, load_buses);
  ProfileSet p;
  p.timestamps = national.timestamps;
  p.load_profile = national.load;
  p.solar_profile = national.solar;
  p.load_buses = load_buses;
  Index peak = 0;
  national.load.segment(static_cast<Index>(peak_window.begin), static_cast<Index>(peak_window.count)).maxCoeff(&peak);
  p.peak_index = peak_window.begin + static_cast<std::size_t>(peak);
  p.peak_load = national.load(static_cast<Index>(p.peak_index));
  if (!(p.peak_load > 0.0)) throw ConfigError("national load is zero over the peak window");

  const auto m = static_cast<Index>(layout.num_loads());
  double total_pd = 0.0;
  Vector pd(m);
  for (Index k = 0; k < m; ++k) {
    pd(k) = model.buses[layout.load_positions[static_cast<std::size_t>(k)]].pd;
    if (pd(k) < 0.0) throw ConfigError("load bus " + std::to_string(load_buses[static_cast<std::size_t>(k)]) + " has negative base load");
    total_pd += pd(k);
  }
  const Vector scale = national.load / p.peak_load;
  const Vector solar_share = national.solar / p.peak_load * (total_pd / static_cast<double>(m));
  p.per_bus_solar = solar_share * Eigen::RowVectorXd::Ones(m);
  p.per_bus_demand = scale * pd.transpose() + p.per_bus_solar;
  return p;
}

}  // namespace gbpfusion::scenario
