#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gbpfusion/scenario/time.hpp"

namespace gbpfusion::experiment {

/// One scored quantity at one hour.
struct EntryResult {
  std::string entity;
  double fused_mean = 0.0;
  double fused_sd = 0.0;
  std::optional<double> raw;
  double raw_sd = 0.0;
  std::optional<double> forecast_mean;
  std::optional<double> forecast_sd;
  std::optional<double> truth;  // present for simulated data
  std::optional<double> z;
  bool flagged = false;
};

struct HourResult {
  scenario::Timestamp timestamp;
  std::string error;  // empty when the hour ran
  bool converged = false;
  int iterations = 0;
  int sweeps = 0;
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  std::size_t audit_checked = 0;
  std::size_t audit_violations = 0;
  double max_asymmetry = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double min_scaled_eigenvalue = std::numeric_limits<double>::infinity();
  std::size_t raw_eigenvalue_flags = 0;
  double max_flagged_norm = 0.0;
  std::size_t y1_rows = 0;
  std::size_t y2_rows = 0;
  std::size_t y3_rows = 0;
  /// Condition number of the standalone state estimation gain at the fused
  /// grid estimate (+inf when singular or absent).
  double se_gain_condition = std::numeric_limits<double>::infinity();
  /// Max-abs error of the fused grid state against the truth.
  std::optional<double> grid_error;
  std::vector<EntryResult> resources;   // x2 entries
  std::vector<EntryResult> injections;  // net active injection per load bus

  bool ok() const { return error.empty(); }

  const EntryResult& resource(const std::string& entity) const { return find(resources, entity); }
  const EntryResult& injection(const std::string& entity) const { return find(injections, entity); }

 private:
  static const EntryResult& find(const std::vector<EntryResult>& v, const std::string& entity) {
    for (const auto& e : v) {
      if (e.entity == entity) return e;
    }
    throw ConfigError("no entry '" + entity + "'");
  }
};

}  // namespace gbpfusion::experiment
