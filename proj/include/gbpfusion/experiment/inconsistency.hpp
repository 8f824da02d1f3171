#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gbpfusion/experiment/records.hpp"

namespace gbpfusion::experiment {

struct InconsistencyNote {
  std::size_t hour = 0;
  std::string entity;
  std::string reason;
};

/// z = (fused - raw) / sqrt(fused_sd^2 + raw_sd^2), flagged when |z| > z*.
/// Treats fused and raw as independent, which they are not (the fused
/// estimate used the raw reading).
inline std::optional<double> z_score(const EntryResult& e) {
  if (!e.raw) return std::nullopt;
  const double s = std::sqrt(e.fused_sd * e.fused_sd + e.raw_sd * e.raw_sd);
  if (!(s > 0.0)) return std::nullopt;
  return (e.fused_mean - *e.raw) / s;
}

/// Fills z and flagged on every resource entry; entries without a raw
/// reading are skipped and listed in the returned notes.
inline std::vector<InconsistencyNote> detect_inconsistency(std::vector<HourResult>& hours, double z_threshold = 1.96) {
  if (!(z_threshold > 0.0)) throw ConfigError("z threshold must be positive");
  std::vector<InconsistencyNote> notes;
  for (std::size_t h = 0; h < hours.size(); ++h) {
    if (!hours[h].ok()) continue;
    for (auto& e : hours[h].resources) {
      e.z = z_score(e);
      e.flagged = e.z && std::abs(*e.z) > z_threshold;
      if (!e.z) notes.push_back({h, e.entity, e.raw ? "zero combined sd" : "raw reading unavailable"});
    }
  }
  return notes;
}

}  // namespace gbpfusion::experiment
