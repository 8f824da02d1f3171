#pragma once

// Output files of a run:
//   results.json  one record per hour (diagnostics and every scored entry)
//   summary.csv   metric,entity,value
//   report.csv    timestamp,series,entity,value (long format plot data)
// Numbers are written with 17 significant digits so they read back exactly.

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gbpfusion/experiment/records.hpp"
#include "gbpfusion/scenario/csv_io.hpp"

namespace gbpfusion::experiment {

using json = nlohmann::ordered_json;

namespace detail {

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline json optional_number(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

inline double number_from(const json& j, double if_null) { return j.is_null() ? if_null : j.get<double>(); }
inline std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline json entry_to_json(const EntryResult& e) {
  json j;
  j["entity"] = e.entity;
  j["fused_mean"] = e.fused_mean;
  j["fused_sd"] = e.fused_sd;
  j["raw"] = optional_number(e.raw);
  j["raw_sd"] = e.raw_sd;
  j["forecast_mean"] = optional_number(e.forecast_mean);
  j["forecast_sd"] = optional_number(e.forecast_sd);
  j["truth"] = optional_number(e.truth);
  j["z"] = optional_number(e.z);
  j["flagged"] = e.flagged;
  return j;
}

inline EntryResult entry_from_json(const json& j) {
  EntryResult e;
  e.entity = j.at("entity").get<std::string>();
  e.fused_mean = j.at("fused_mean").get<double>();
  e.fused_sd = j.at("fused_sd").get<double>();
  e.raw = optional_from(j.at("raw"));
  e.raw_sd = j.at("raw_sd").get<double>();
  e.forecast_mean = optional_from(j.at("forecast_mean"));
  e.forecast_sd = optional_from(j.at("forecast_sd"));
  e.truth = optional_from(j.at("truth"));
  e.z = optional_from(j.at("z"));
  e.flagged = j.at("flagged").get<bool>();
  return e;
}

}  // namespace detail

inline json hour_to_json(const HourResult& h) {
  json j;
  j["timestamp"] = scenario::format_timestamp(h.timestamp);
  j["status"] = h.ok() ? "ok" : "error";
  j["error"] = h.error;
  j["converged"] = h.converged;
  j["iterations"] = h.iterations;
  j["sweeps"] = h.sweeps;
  j["final_residual"] = detail::number_or_null(h.final_residual);
  j["audit"] = {{"checked", h.audit_checked},
                {"violations", h.audit_violations},
                {"max_asymmetry", detail::number_or_null(h.max_asymmetry)},
                {"min_eigenvalue", detail::number_or_null(h.min_eigenvalue)},
                {"min_scaled_eigenvalue", detail::number_or_null(h.min_scaled_eigenvalue)},
                {"raw_eigenvalue_flags", h.raw_eigenvalue_flags},
                {"max_flagged_norm", h.max_flagged_norm}};
  j["rows"] = {{"state_estimation", h.y1_rows}, {"smart_meter", h.y2_rows}, {"forecast", h.y3_rows}};
  j["se_gain_condition"] = detail::number_or_null(h.se_gain_condition);
  j["grid_error"] = detail::optional_number(h.grid_error);
  json res = json::array();
  for (const auto& e : h.resources) res.push_back(detail::entry_to_json(e));
  j["resources"] = std::move(res);
  json inj = json::array();
  for (const auto& e : h.injections) inj.push_back(detail::entry_to_json(e));
  j["injections"] = std::move(inj);
  return j;
}

inline HourResult hour_from_json(const json& j) {
  HourResult h;
  h.timestamp = scenario::parse_timestamp(j.at("timestamp").get<std::string>());
  h.error = j.at("error").get<std::string>();
  h.converged = j.at("converged").get<bool>();
  h.iterations = j.at("iterations").get<int>();
  h.sweeps = j.at("sweeps").get<int>();
  h.final_residual = detail::number_from(j.at("final_residual"), std::numeric_limits<double>::quiet_NaN());
  const auto& a = j.at("audit");
  h.audit_checked = a.at("checked").get<std::size_t>();
  h.audit_violations = a.at("violations").get<std::size_t>();
  h.max_asymmetry = detail::number_from(a.at("max_asymmetry"), 0.0);
  h.min_eigenvalue = detail::number_from(a.at("min_eigenvalue"), std::numeric_limits<double>::infinity());
  h.min_scaled_eigenvalue = detail::number_from(a.at("min_scaled_eigenvalue"), std::numeric_limits<double>::infinity());
  h.raw_eigenvalue_flags = a.at("raw_eigenvalue_flags").get<std::size_t>();
  h.max_flagged_norm = a.at("max_flagged_norm").get<double>();
  const auto& r = j.at("rows");
  h.y1_rows = r.at("state_estimation").get<std::size_t>();
  h.y2_rows = r.at("smart_meter").get<std::size_t>();
  h.y3_rows = r.at("forecast").get<std::size_t>();
  h.se_gain_condition = detail::number_from(j.at("se_gain_condition"), std::numeric_limits<double>::infinity());
  h.grid_error = detail::optional_from(j.at("grid_error"));
  for (const auto& e : j.at("resources")) h.resources.push_back(detail::entry_from_json(e));
  for (const auto& e : j.at("injections")) h.injections.push_back(detail::entry_from_json(e));
  return h;
}

inline void write_results_json(std::ostream& out, const std::string& name, std::uint64_t seed,
                               const std::vector<HourResult>& hours) {
  json j;
  j["experiment"] = name;
  j["seed"] = seed;
  json records = json::array();
  for (const auto& h : hours) records.push_back(hour_to_json(h));
  j["hours"] = std::move(records);
  out << j.dump(1) << '\n';
}

struct ResultsFile {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<HourResult> hours;
};

inline ResultsFile read_results_json(std::istream& in, const std::string& source = "results.json") {
  json j;
  try {
    j = json::parse(in);
    ResultsFile r;
    r.experiment = j.at("experiment").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& h : j.at("hours")) r.hours.push_back(hour_from_json(h));
    return r;
  } catch (const json::exception& e) {
    throw ConfigError(source + ": malformed results file (" + e.what() + ")");
  }
}

// ---- summary ---------------------------------------------------------------

struct EntryScore {
  std::string entity;
  std::size_t hours = 0;
  double rmse_fused = 0.0;
  double rmse_raw = std::numeric_limits<double>::quiet_NaN();  // NaN when no raw reading was scored
  double mean_fused_sd = 0.0;
  double flag_rate = 0.0;
};

/// Per resource entity: RMSE of the fused mean against truth, RMSE of the
/// raw reading over the hours that had one, mean fused sd and flag rate.
inline std::vector<EntryScore> score_resources(const std::vector<HourResult>& hours) {
  std::vector<EntryScore> out;
  const HourResult* first = nullptr;
  for (const auto& h : hours) {
    if (h.ok()) {
      first = &h;
      break;
    }
  }
  if (!first) return out;
  for (std::size_t k = 0; k < first->resources.size(); ++k) {
    EntryScore s;
    s.entity = first->resources[k].entity;
    double sf = 0.0, sr = 0.0, sd = 0.0;
    std::size_t n = 0, nt = 0, nr = 0, flags = 0;
    for (const auto& h : hours) {
      if (!h.ok()) continue;
      const auto& e = h.resources[k];
      sd += e.fused_sd;
      flags += e.flagged ? 1 : 0;
      ++n;
      if (!e.truth) continue;
      ++nt;
      sf += (e.fused_mean - *e.truth) * (e.fused_mean - *e.truth);
      if (e.raw) {
        sr += (*e.raw - *e.truth) * (*e.raw - *e.truth);
        ++nr;
      }
    }
    s.hours = n;
    s.rmse_fused = nt ? std::sqrt(sf / static_cast<double>(nt)) : 0.0;
    if (nr) s.rmse_raw = std::sqrt(sr / static_cast<double>(nr));
    s.mean_fused_sd = n ? sd / static_cast<double>(n) : 0.0;
    s.flag_rate = n ? static_cast<double>(flags) / static_cast<double>(n) : 0.0;
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<HourResult>& hours) {
  using scenario::csv::format_number;
  std::size_t errored = 0, converged = 0, violations = 0;
  int max_sweeps = 0, max_iterations = 0;
  for (const auto& h : hours) {
    if (!h.ok()) {
      ++errored;
      continue;
    }
    converged += h.converged ? 1 : 0;
    violations += h.audit_violations;
    max_sweeps = std::max(max_sweeps, h.sweeps);
    max_iterations = std::max(max_iterations, h.iterations);
  }
  out << "metric,entity,value\n";
  out << "hours,all," << hours.size() << '\n';
  out << "errored_hours,all," << errored << '\n';
  out << "converged_hours,all," << converged << '\n';
  out << "max_sweeps,all," << max_sweeps << '\n';
  out << "max_iterations,all," << max_iterations << '\n';
  out << "audit_violations,all," << violations << '\n';
  for (const auto& s : score_resources(hours)) {
    out << "rmse_fused," << s.entity << ',' << format_number(s.rmse_fused) << '\n';
    if (!std::isnan(s.rmse_raw)) out << "rmse_raw," << s.entity << ',' << format_number(s.rmse_raw) << '\n';
    out << "mean_fused_sd," << s.entity << ',' << format_number(s.mean_fused_sd) << '\n';
    out << "flag_rate," << s.entity << ',' << format_number(s.flag_rate) << '\n';
  }
}

// ---- report (plot data) ----------------------------------------------------

struct ReportRow {
  scenario::Timestamp timestamp;
  std::string series;
  std::string entity;
  double value = 0.0;

  bool operator==(const ReportRow&) const = default;
};

/// Rows ordered by hour, then entity (resources before injections), then
/// series: truth, raw, forecast, fused_mean, fused_lower95, fused_upper95,
/// fused_sd, z. Absent values are omitted; failed hours contribute nothing.
inline std::vector<ReportRow> report_rows(const std::vector<HourResult>& hours) {
  std::vector<ReportRow> rows;
  auto add = [&](const HourResult& h, const EntryResult& e) {
    auto put = [&](const char* series, double v) { rows.push_back({h.timestamp, series, e.entity, v}); };
    if (e.truth) put("truth", *e.truth);
    if (e.raw) put("raw", *e.raw);
    if (e.forecast_mean) put("forecast", *e.forecast_mean);
    put("fused_mean", e.fused_mean);
    put("fused_lower95", e.fused_mean - 1.96 * e.fused_sd);
    put("fused_upper95", e.fused_mean + 1.96 * e.fused_sd);
    put("fused_sd", e.fused_sd);
    if (e.z) put("z", *e.z);
  };
  for (const auto& h : hours) {
    if (!h.ok()) continue;
    for (const auto& e : h.resources) add(h, e);
    for (const auto& e : h.injections) add(h, e);
  }
  return rows;
}

inline void emit_report(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "timestamp,series,entity,value\n";
  for (const auto& r : rows) {
    out << scenario::format_timestamp(r.timestamp) << ',' << r.series << ',' << r.entity << ','
        << scenario::csv::format_number(r.value) << '\n';
  }
  if (!out) throw Error("failed to write report");
}

inline std::vector<ReportRow> parse_report(std::istream& in) {
  std::vector<ReportRow> rows;
  scenario::csv::read_rows(in, {"timestamp", "series", "entity", "value"},
                           [&](const std::vector<std::string>& f, std::size_t line) {
                             rows.push_back({scenario::csv::parse_time(f[0], line), f[1], f[2],
                                             scenario::csv::parse_number(f[3], line, 4)});
                           });
  return rows;
}

}  // namespace gbpfusion::experiment
