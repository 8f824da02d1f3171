#pragma once

#include <algorithm>
#include <atomic>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <Eigen/SVD>

#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/experiment/config.hpp"
#include "gbpfusion/experiment/inconsistency.hpp"
#include "gbpfusion/forecast/bus_forecasts.hpp"
#include "gbpfusion/fusion/graph_builder.hpp"
#include "gbpfusion/power/case_file.hpp"
#include "gbpfusion/scenario/csv_io.hpp"

namespace gbpfusion::experiment {

/// Everything the per-hour loop needs, built once per run.
struct ExperimentData {
  std::shared_ptr<const power::Network> network;
  fusion::FusionStateLayout layout;
  scenario::WeatherSeries weather;
  scenario::NationalSeries national;
  scenario::ProfileSet profiles;
  std::optional<forecast::BusForecasts> forecasts;
  std::vector<scenario::ScenarioEvent> events;
  scenario::MeasurementSet measurements;
};

inline power::Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open case file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return power::Network(power::parse_case_file(ss.str()));
  } catch (const ParseError& e) {
    throw ParseError(path.string(), e.what(), e.line());
  }
}

namespace detail {

inline scenario::NationalSeries slice(const scenario::NationalSeries& s, std::size_t b, std::size_t n) {
  return {std::vector<scenario::Timestamp>(s.timestamps.begin() + static_cast<long>(b),
                                           s.timestamps.begin() + static_cast<long>(b + n)),
          s.load.segment(static_cast<Index>(b), static_cast<Index>(n)),
          s.solar.segment(static_cast<Index>(b), static_cast<Index>(n))};
}

inline scenario::WeatherSeries slice(const scenario::WeatherSeries& s, std::size_t b, std::size_t n) {
  return {std::vector<scenario::Timestamp>(s.timestamps.begin() + static_cast<long>(b),
                                           s.timestamps.begin() + static_cast<long>(b + n)),
          s.t_mean.segment(static_cast<Index>(b), static_cast<Index>(n)),
          s.t_max.segment(static_cast<Index>(b), static_cast<Index>(n)),
          s.dni.segment(static_cast<Index>(b), static_cast<Index>(n)),
          s.dhi.segment(static_cast<Index>(b), static_cast<Index>(n))};
}

/// Rows [start, start + hours) of an imported series.
template <class Series>
Series window_of(const Series& s, scenario::Timestamp start, std::size_t hours, const std::string& what) {
  if (s.timestamps.empty() || start < s.timestamps.front()) {
    throw ConfigError(what + " does not cover the configured start " + scenario::format_timestamp(start));
  }
  const auto b = static_cast<std::size_t>(
      std::chrono::duration_cast<std::chrono::hours>(start - s.timestamps.front()).count());
  if (b + hours > s.timestamps.size()) throw ConfigError(what + " is shorter than the configured horizon");
  return slice(s, b, hours);
}

}  // namespace detail

inline ExperimentData prepare_experiment(const ExperimentConfig& config) {
  ExperimentData d;
  d.network = std::make_shared<const power::Network>(load_network(config.case_path));
  d.layout = fusion::FusionStateLayout::for_model(d.network->model, config.load_buses);
  const std::size_t total = config.total_hours();
  if (config.data_source == DataSource::Synthetic) {
    const auto ts = scenario::hourly_range(config.start, total);
    d.weather = scenario::generate_weather(ts, config.seed, config.synthetic);
    d.national = scenario::generate_national_series(d.weather, config.seed, config.synthetic);
  } else {
    d.national = detail::window_of(scenario::national_from_table(scenario::read_timeseries_csv(config.national_csv.string())),
                                   config.start, total, config.national_csv.string());
    d.weather = detail::window_of(scenario::read_weather_csv(config.weather_csv.string()), config.start, total,
                                  config.weather_csv.string());
  }
  d.profiles = scenario::generate_profiles(d.network->model, d.national, config.load_buses, config.validation_window());
  const scenario::ForecastSet* fs = nullptr;
  if (config.use_forecasts) {
    d.forecasts = forecast::build_bus_forecasts(d.profiles, d.weather, config.training_window(),
                                                config.validation_window(), config.fit);
    fs = &d.forecasts->set;
  }
  auto ms = scenario::simulate_measurements(*d.network, d.profiles, config.noise, config.seed,
                                            config.validation_window(), fs);
  if (!config.use_meters) {
    for (auto& h : ms.hours) std::fill(h.evidence.y2_available.begin(), h.evidence.y2_available.end(), 0);
  }
  d.events = config.resolve_events();
  d.measurements = scenario::apply_scenario_events(*d.network, std::move(ms), d.events);
  return d;
}

inline fusion::FusionOptions fusion_options(const ExperimentConfig& config) {
  fusion::FusionOptions o;
  o.noise.power_sd = config.noise.power_sd;
  o.noise.voltage_sd = config.noise.voltage_sd;
  o.noise.meter_sd = config.noise.meter_sd;
  o.noise.constraint_variance = config.constraint_variance;
  return o;
}

/// Condition number (2-norm) of F1' R1^-1 F1 for the available grid rows at
/// `x1`; +inf when singular or when no rows are available.
inline double state_estimation_gain_condition(const power::Network& net, const fusion::HourlyEvidence& ev,
                                              const Vector& x1, const fusion::NoiseLevels& noise) {
  const power::Selector sel = fusion::available_selector(net.num_buses(), ev.y1_available);
  if (sel.empty()) return std::numeric_limits<double>::infinity();
  const Matrix F = power::power_flow_jacobian(net, net.indexer.to_state(x1), sel);
  const Vector w = fusion::state_estimation_noise(sel, noise).diagonal().cwiseInverse();
  const Matrix G = F.transpose() * w.asDiagonal() * F;
  const Vector s = Eigen::JacobiSVD<Matrix>(G).singularValues();
  if (!(s(s.size() - 1) > 0.0)) return std::numeric_limits<double>::infinity();
  return s(0) / s(s.size() - 1);
}

/// Fuse one hour and score it against the stored truth.
inline HourResult run_hour(const ExperimentData& data, const ExperimentConfig& config, std::size_t index) {
  const auto& rec = data.measurements.hours.at(index);
  const auto& ev = rec.evidence;
  const auto& net = *data.network;
  const auto& layout = data.layout;
  HourResult out;
  out.timestamp = rec.timestamp;
  out.y1_rows = fusion::HourlyEvidence::count(ev.y1_available);
  out.y2_rows = fusion::HourlyEvidence::count(ev.y2_available);
  out.y3_rows = fusion::HourlyEvidence::count(ev.y3_available);
  try {
    const auto options = fusion_options(config);
    bp::FactorGraph graph = fusion::build_fusion_graph(data.network, layout, ev, options);
    const bp::InferenceResult res = bp::run_inference(graph, config.inference);
    const auto& diag = res.diagnostics;
    out.converged = diag.converged;
    out.iterations = diag.iterations;
    out.sweeps = diag.sweeps;
    out.final_residual = diag.final_residual;
    out.audit_checked = diag.audit.checked;
    out.audit_violations = diag.audit.violations;
    out.max_asymmetry = diag.audit.max_asymmetry;
    out.min_eigenvalue = diag.audit.min_eigenvalue;
    out.min_scaled_eigenvalue = diag.audit.min_scaled_eigenvalue;
    out.raw_eigenvalue_flags = diag.audit.raw_eigenvalue_flags;
    out.max_flagged_norm = diag.audit.max_flagged_norm;

    const auto& m1 = res.marginals.at(fusion::kGridVariable);
    const auto& m2 = res.marginals.at(fusion::kResourceVariable);
    out.se_gain_condition = state_estimation_gain_condition(net, ev, m1.mean, options.noise);
    out.grid_error = (m1.mean - net.indexer.to_vector(rec.true_state)).cwiseAbs().maxCoeff();

    for (Index i = 0; i < layout.x2_dim(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      EntryResult e;
      e.entity = layout.entry_name(i);
      e.fused_mean = m2.mean(i);
      e.fused_sd = std::sqrt(std::max(0.0, m2.cov(i, i)));
      if (ev.y2_available[k]) e.raw = ev.y2(i);
      e.raw_sd = config.noise.meter_sd;
      if (ev.y3_available[k]) {
        e.forecast_mean = ev.y3_mean(i);
        e.forecast_sd = std::sqrt(ev.y3_variance(i));
      }
      e.truth = rec.true_x2(i);
      out.resources.push_back(std::move(e));
    }

    const Eigen::VectorXcd s_true = power::bus_injections(net, rec.true_state);
    for (std::size_t k = 0; k < layout.num_loads(); ++k) {
      const Index d = fusion::FusionStateLayout::demand_index(k);
      const Index s = fusion::FusionStateLayout::solar_index(k);
      const std::size_t pos = layout.load_positions[k];
      const double pg = net.model.generation_p(pos);
      EntryResult e;
      e.entity = "injection_bus" + std::to_string(layout.load_buses[k]);
      e.fused_mean = m2.mean(s) - m2.mean(d);
      const double var = m2.cov(s, s) + m2.cov(d, d) - 2.0 * m2.cov(s, d);
      e.fused_sd = std::sqrt(std::max(0.0, var));
      if (ev.y1_available[pos]) e.raw = ev.y1(static_cast<Index>(pos)) - pg;
      e.raw_sd = config.noise.power_sd;
      e.truth = s_true(static_cast<Index>(pos)).real() - pg;
      out.injections.push_back(std::move(e));
    }
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

/// All hours of the validation window, `jobs` at a time. Output order is
/// the hour order regardless of `jobs`.
inline std::vector<HourResult> run_hours(const ExperimentData& data, const ExperimentConfig& config, unsigned jobs = 1) {
  const std::size_t n = data.measurements.size();
  std::vector<HourResult> results(n);
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) results[i] = run_hour(data, config, i);
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  detect_inconsistency(results, config.z_threshold);
  return results;
}

}  // namespace gbpfusion::experiment
