#pragma once

#include <random>
#include <vector>

#include "gbpfusion/fusion/evidence.hpp"
#include "gbpfusion/power/power_flow.hpp"
#include "gbpfusion/scenario/profiles.hpp"

namespace gbpfusion::scenario {

struct NoiseConfig {
  double power_sd = 0.01;
  double voltage_sd = 0.5e-3;
  double meter_sd = 0.02;

  void validate() const {
    if (!(power_sd > 0.0) || !(voltage_sd > 0.0) || !(meter_sd > 0.0)) {
      throw ConfigError("measurement noise standard deviations must be positive");
    }
  }
};

/// Forecast means and variances for the simulated hours, rows = hours,
/// columns in x2 order.
struct ForecastSet {
  Matrix mean;
  Matrix variance;
};

/// One simulated hour. Truth fields are for scoring only.
struct HourRecord {
  Timestamp timestamp;
  std::size_t profile_index = 0;
  power::PowerFlowTargets targets;
  power::GridState true_state;
  Vector true_x2;
  /// Raw noise draws, kept so a changed truth can be re-measured with the
  /// same noise.
  Vector y1_noise;
  Vector y2_noise;
  fusion::HourlyEvidence evidence;
};

struct MeasurementSet {
  fusion::FusionStateLayout layout;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  std::vector<HourRecord> hours;

  std::size_t size() const { return hours.size(); }
  Timestamp first() const { return hours.front().timestamp; }
  Timestamp last() const { return hours.back().timestamp; }

  /// Position of `t` among the simulated hours, or size() if absent.
  std::size_t find(Timestamp t) const {
    if (hours.empty() || t < first() || t > last()) return hours.size();
    return static_cast<std::size_t>(std::chrono::duration_cast<std::chrono::hours>(t - first()).count());
  }
};

/// Power flow targets at `hour`: case generation, load buses from the
/// profile (Q scales with demand by the case Q/P ratio), other loads by the
/// national load scale.
inline power::PowerFlowTargets hour_targets(const power::BusBranchModel& model, const fusion::FusionStateLayout& layout,
                                            const ProfileSet& profiles, std::size_t hour) {
  power::PowerFlowTargets t = power::base_case_targets(model);
  const double s = profiles.load_scale(hour);
  const auto h = static_cast<Index>(hour);
  for (std::size_t b = 0; b < model.num_buses(); ++b) {
    const auto i = static_cast<Index>(b);
    t.p(i) = model.generation_p(b) - s * model.buses[b].pd;
    t.q(i) = model.generation_q(b) - s * model.buses[b].qd;
  }
  for (std::size_t k = 0; k < layout.num_loads(); ++k) {
    const std::size_t b = layout.load_positions[k];
    const auto i = static_cast<Index>(b);
    const auto c = static_cast<Index>(k);
    const auto& bus = model.buses[b];
    const double demand = profiles.per_bus_demand(h, c);
    const double solar = profiles.per_bus_solar(h, c);
    const double q_ratio = bus.pd != 0.0 ? bus.qd / bus.pd : 0.0;
    t.p(i) = model.generation_p(b) + solar - demand;
    t.q(i) = model.generation_q(b) - q_ratio * demand;
  }
  return t;
}

namespace detail {

inline void measure_grid(const power::Network& net, HourRecord& rec) {
  const auto sel = power::full_selector(net.num_buses());
  rec.evidence.y1 = power::power_flow_equations(net, rec.true_state, sel) + rec.y1_noise;
}

inline void solve_truth(const power::Network& net, HourRecord& rec) {
  try {
    rec.true_state = power::solve_power_flow(net, rec.targets);
  } catch (const PowerFlowDiverged& e) {
    throw PowerFlowDiverged("hour " + format_timestamp(rec.timestamp), e);
  }
}

}  // namespace detail

/// Simulate y1, y2 (and y3 when `forecasts` is given) for `window` of the
/// profile horizon. Noise for hour i of the horizon comes from its own
/// stream derive_seed(seed, i).
inline MeasurementSet simulate_measurements(const power::Network& net, const ProfileSet& profiles,
                                            const NoiseConfig& noise, std::uint64_t seed, HourWindow window = {},
                                            const ForecastSet* forecasts = nullptr) {
  noise.validate();
  if (window.count == 0) window = {0, profiles.size()};
  if (window.end() > profiles.size()) throw ConfigError("simulation window exceeds the profile horizon");
  MeasurementSet ms;
  ms.layout = fusion::FusionStateLayout::for_model(net.model, profiles.load_buses);
  ms.noise = noise;
  ms.seed = seed;
  const auto nb = static_cast<Index>(net.num_buses());
  const Index x2 = ms.layout.x2_dim();
  if (forecasts) {
    const auto rows = static_cast<Index>(window.count);
    if (forecasts->mean.rows() != rows || forecasts->mean.cols() != x2 || forecasts->variance.rows() != rows ||
        forecasts->variance.cols() != x2) {
      throw ConfigError("forecasts do not match the simulation window");
    }
  }

  ms.hours.reserve(window.count);
  for (std::size_t w = 0; w < window.count; ++w) {
    const std::size_t hour = window.begin + w;
    HourRecord rec;
    rec.timestamp = profiles.timestamps[hour];
    rec.profile_index = hour;
    rec.targets = hour_targets(net.model, ms.layout, profiles, hour);
    rec.true_x2 = profiles.resources(hour);
    detail::solve_truth(net, rec);

    std::mt19937_64 rng(derive_seed(seed, hour));
    std::normal_distribution<double> z(0.0, 1.0);
    rec.y1_noise.resize(3 * nb);
    for (Index i = 0; i < 3 * nb; ++i) rec.y1_noise(i) = (i < 2 * nb ? noise.power_sd : noise.voltage_sd) * z(rng);
    rec.y2_noise.resize(x2);
    for (Index i = 0; i < x2; ++i) rec.y2_noise(i) = noise.meter_sd * z(rng);

    auto& ev = rec.evidence;
    detail::measure_grid(net, rec);
    ev.y1_available.assign(static_cast<std::size_t>(3 * nb), 1);
    ev.y2 = rec.true_x2 + rec.y2_noise;
    ev.y2_available.assign(static_cast<std::size_t>(x2), 1);
    if (forecasts) {
      ev.y3_mean = forecasts->mean.row(static_cast<Index>(w)).transpose();
      ev.y3_variance = forecasts->variance.row(static_cast<Index>(w)).transpose();
      ev.y3_available.assign(static_cast<std::size_t>(x2), 1);
    } else {
      ev.y3_mean = Vector::Zero(x2);
      ev.y3_variance = Vector::Ones(x2);
      ev.y3_available.assign(static_cast<std::size_t>(x2), 0);
    }
    ms.hours.push_back(std::move(rec));
  }
  return ms;
}

}  // namespace gbpfusion::scenario
