#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gbpfusion/bp/factor_graph.hpp"
#include "gbpfusion/experiment/ini.hpp"
#include "gbpfusion/forecast/models.hpp"
#include "gbpfusion/fusion/layout.hpp"
#include "gbpfusion/scenario/events.hpp"
#include "gbpfusion/scenario/synthetic.hpp"

namespace gbpfusion::experiment {

enum class DataSource { Synthetic, Csv };

/// Event as written in the config. The window is either [begin, end] or
/// the last `last_hours` of the validation window.
struct EventSpec {
  std::string label;
  scenario::EventKind kind = scenario::EventKind::ObservabilityLoss;
  std::optional<scenario::Timestamp> begin;
  std::optional<scenario::Timestamp> end;
  long last_hours = 0;
  std::vector<int> buses;
  double multiplier = 1.0;
  std::size_t line = 0;
};

struct ExperimentConfig {
  std::string source;  // config path
  std::string name = "experiment";
  std::uint64_t seed = 42;
  std::filesystem::path output_dir;

  std::filesystem::path case_path;
  std::vector<int> load_buses = fusion::default_load_buses();

  scenario::Timestamp start = scenario::parse_timestamp("2019-06-03T00:00:00Z");
  std::size_t training_hours = 6 * 168;
  std::size_t validation_hours = 168;

  DataSource data_source = DataSource::Synthetic;
  std::filesystem::path national_csv;
  std::filesystem::path weather_csv;
  scenario::SyntheticOptions synthetic;

  scenario::NoiseConfig noise;
  double constraint_variance = 1e-10;
  bp::InferenceConfig inference{50, 1e-6, 0.5, 1e-12, 0, true};
  forecast::FitOptions fit;
  bool use_forecasts = true;
  bool use_meters = true;

  std::vector<EventSpec> events;
  double z_threshold = 1.96;

  std::size_t total_hours() const { return training_hours + validation_hours; }
  scenario::HourWindow training_window() const { return {0, training_hours}; }
  scenario::HourWindow validation_window() const { return {training_hours, validation_hours}; }
  scenario::Timestamp validation_start() const { return start + std::chrono::hours{static_cast<long>(training_hours)}; }
  scenario::Timestamp validation_end() const {
    return validation_start() + std::chrono::hours{static_cast<long>(validation_hours) - 1};
  }

  /// Concrete event windows.
  std::vector<scenario::ScenarioEvent> resolve_events() const {
    std::vector<scenario::ScenarioEvent> out;
    for (const auto& e : events) {
      scenario::ScenarioEvent ev;
      ev.kind = e.kind;
      ev.buses = e.buses;
      ev.multiplier = e.multiplier;
      if (e.last_hours > 0) {
        ev.end = validation_end();
        ev.begin = validation_end() - std::chrono::hours{e.last_hours - 1};
      } else {
        ev.begin = *e.begin;
        ev.end = *e.end;
      }
      if (ev.begin < validation_start() || ev.end > validation_end()) {
        throw ParseError(source, "event [" + e.label + "] lies outside the validation window", e.line);
      }
      out.push_back(std::move(ev));
    }
    return out;
  }
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

inline scenario::Timestamp timestamp_value(SectionReader& r, const std::string& key) {
  const std::string t = r.required(key);
  try {
    return scenario::parse_timestamp(t);
  } catch (const ConfigError& e) {
    r.fail(key, e.what());
  }
}

}  // namespace detail

/// Parse and validate a config. Relative paths are resolved against the
/// config file's directory; referenced input files must exist.
inline ExperimentConfig parse_experiment_config(const IniFile& ini) {
  ExperimentConfig c;
  c.source = ini.source;
  const std::filesystem::path base = std::filesystem::path(ini.source).parent_path();

  for (const auto& s : ini.sections) {
    static const std::vector<std::string> known{"", "experiment", "network", "horizon", "data", "noise",
                                                "inference", "forecast", "detection"};
    if (s.name.rfind("event.", 0) == 0) continue;
    if (std::find(known.begin(), known.end(), s.name) == known.end()) ini.fail(s.line, "unknown section [" + s.name + "]");
    if (s.name.empty() && !s.values.empty()) ini.fail(s.values.begin()->second.line, "key outside of any section");
  }

  SectionReader exp(ini, ini.find("experiment"));
  c.name = exp.text("name", std::filesystem::path(ini.source).stem().string());
  const long seed = exp.integer("seed", 42);
  if (seed < 0) exp.fail("seed", "seed must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.output_dir = detail::resolve_path(base, exp.text("output", "results/" + c.name));
  exp.reject_unknown();

  SectionReader net(ini, ini.find("network"));
  if (!net.present()) ini.fail(0, "missing section [network]");
  c.case_path = detail::resolve_path(base, net.required("case"));
  if (!std::filesystem::exists(c.case_path)) net.fail("case", "case file not found: " + c.case_path.string());
  c.load_buses = net.int_list("load_buses", c.load_buses);
  net.reject_unknown();

  SectionReader hz(ini, ini.find("horizon"));
  if (hz.has("start")) c.start = detail::timestamp_value(hz, "start");
  const long train = hz.integer("training_hours", static_cast<long>(c.training_hours));
  const long valid = hz.integer("validation_hours", static_cast<long>(c.validation_hours));
  if (train < 0) hz.fail("training_hours", "training_hours must be nonnegative");
  if (valid <= 0) hz.fail("validation_hours", "validation window must be nonempty");
  c.training_hours = static_cast<std::size_t>(train);
  c.validation_hours = static_cast<std::size_t>(valid);
  hz.reject_unknown();

  SectionReader data(ini, ini.find("data"));
  const std::string src = data.text("source", "synthetic");
  if (src == "synthetic") {
    c.data_source = DataSource::Synthetic;
    c.synthetic.latitude_deg = data.number("latitude_deg", c.synthetic.latitude_deg);
    c.synthetic.longitude_deg = data.number("longitude_deg", c.synthetic.longitude_deg);
    c.synthetic.solar_capacity = data.number("solar_capacity", c.synthetic.solar_capacity);
    c.synthetic.gross_load_base = data.number("gross_load_base", c.synthetic.gross_load_base);
  } else if (src == "csv") {
    c.data_source = DataSource::Csv;
    c.national_csv = detail::resolve_path(base, data.required("national_csv"));
    c.weather_csv = detail::resolve_path(base, data.required("weather_csv"));
    if (!std::filesystem::exists(c.national_csv)) data.fail("national_csv", "file not found: " + c.national_csv.string());
    if (!std::filesystem::exists(c.weather_csv)) data.fail("weather_csv", "file not found: " + c.weather_csv.string());
  } else {
    data.fail("source", "source must be 'synthetic' or 'csv', got '" + src + "'");
  }
  c.use_meters = data.boolean("smart_meters", true);
  c.use_forecasts = data.boolean("forecasts", true);
  data.reject_unknown();

  SectionReader noise(ini, ini.find("noise"));
  c.noise.power_sd = noise.number("power_sd", c.noise.power_sd);
  c.noise.voltage_sd = noise.number("voltage_sd", c.noise.voltage_sd);
  c.noise.meter_sd = noise.number("meter_sd", c.noise.meter_sd);
  c.constraint_variance = noise.number("constraint_variance", c.constraint_variance);
  try {
    c.noise.validate();
  } catch (const ConfigError& e) {
    noise.fail("power_sd", e.what());
  }
  if (!(c.constraint_variance > 0.0)) noise.fail("constraint_variance", "constraint_variance must be positive");
  noise.reject_unknown();

  SectionReader inf(ini, ini.find("inference"));
  c.inference.max_outer_iters = static_cast<int>(inf.integer("max_outer_iters", c.inference.max_outer_iters));
  c.inference.tol = inf.number("tol", c.inference.tol);
  c.inference.damping = inf.number("damping", c.inference.damping);
  c.inference.jitter = inf.number("jitter", c.inference.jitter);
  c.inference.audit_messages = inf.boolean("audit_messages", c.inference.audit_messages);
  try {
    c.inference.validate();
  } catch (const ConfigError& e) {
    ini.fail(inf.line_of("tol"), e.what());
  }
  inf.reject_unknown();

  SectionReader fc(ini, ini.find("forecast"));
  c.fit.knots = static_cast<int>(fc.integer("knots", c.fit.knots));
  if (c.fit.knots < 4) fc.fail("knots", "knots must be at least 4");
  fc.reject_unknown();
  if (c.use_forecasts && c.training_hours < c.fit.min_rows) {
    hz.fail("training_hours", "forecasts need at least " + std::to_string(c.fit.min_rows) + " training hours");
  }

  SectionReader det(ini, ini.find("detection"));
  c.z_threshold = det.number("z_threshold", c.z_threshold);
  if (!(c.z_threshold > 0.0)) det.fail("z_threshold", "z_threshold must be positive");
  det.reject_unknown();

  for (const auto& s : ini.sections) {
    if (s.name.rfind("event.", 0) != 0) continue;
    SectionReader ev(ini, &s);
    EventSpec e;
    e.label = s.name.substr(6);
    e.line = s.line;
    try {
      e.kind = scenario::parse_event_kind(ev.required("kind"));
    } catch (const ConfigError& err) {
      ev.fail("kind", err.what());
    }
    e.buses = ev.int_list("buses", {});
    if (e.buses.empty()) ini.fail(s.line, "event [" + s.name + "] needs 'buses'");
    e.last_hours = ev.integer("last_hours", 0);
    if (ev.has("begin") || ev.has("end")) {
      if (e.last_hours != 0) ev.fail("begin", "use either begin/end or last_hours");
      e.begin = detail::timestamp_value(ev, "begin");
      e.end = detail::timestamp_value(ev, "end");
    } else if (e.last_hours <= 0) {
      ini.fail(s.line, "event [" + s.name + "] needs begin/end or a positive last_hours");
    }
    if (e.last_hours > static_cast<long>(c.validation_hours)) ev.fail("last_hours", "last_hours exceeds the validation window");
    e.multiplier = ev.number("multiplier", 1.0);
    if (e.kind == scenario::EventKind::SolarCapacityChange && !ev.has("multiplier")) {
      ini.fail(s.line, "solar_capacity_change needs 'multiplier'");
    }
    if (!(e.multiplier >= 0.0)) ev.fail("multiplier", "multiplier must be nonnegative");
    ev.reject_unknown();
    c.events.push_back(std::move(e));
  }
  c.resolve_events();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_ini(path));
}

}  // namespace gbpfusion::experiment
