#pragma once

#include <string>
#include <vector>

#include "gbpfusion/scenario/measurements.hpp"

namespace gbpfusion::scenario {

enum class EventKind { ObservabilityLoss, SolarCapacityChange };

inline const char* event_kind_name(EventKind k) {
  return k == EventKind::ObservabilityLoss ? "observability_loss" : "solar_capacity_change";
}

inline EventKind parse_event_kind(const std::string& s) {
  if (s == "observability_loss") return EventKind::ObservabilityLoss;
  if (s == "solar_capacity_change") return EventKind::SolarCapacityChange;
  throw ConfigError("unknown event kind '" + s + "'");
}

/// Applies to hours t with begin <= t <= end.
struct ScenarioEvent {
  EventKind kind = EventKind::ObservabilityLoss;
  Timestamp begin;
  Timestamp end;
  std::vector<int> buses;
  double multiplier = 1.0;

  bool covers(Timestamp t) const { return begin <= t && t <= end; }
  bool overlaps(const ScenarioEvent& o) const { return begin <= o.end && o.begin <= end; }
};

namespace detail {

inline void check_events(const power::BusBranchModel& model, const MeasurementSet& ms,
                         const std::vector<ScenarioEvent>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::string name = std::string(event_kind_name(e.kind)) + " event " + std::to_string(i + 1);
    if (e.end < e.begin) throw ConfigError(name + " ends before it begins");
    if (ms.hours.empty() || e.begin < ms.first() || e.end > ms.last()) {
      throw ConfigError(name + " window is outside the simulated horizon");
    }
    if (e.buses.empty()) throw ConfigError(name + " lists no buses");
    for (int b : e.buses) {
      if (!model.has_bus(b)) throw ConfigError(name + " refers to unknown bus " + std::to_string(b));
    }
    if (e.kind == EventKind::SolarCapacityChange) {
      if (!(e.multiplier >= 0.0) || !std::isfinite(e.multiplier)) throw ConfigError(name + " has an invalid multiplier");
      for (int b : e.buses) ms.layout.load_slot(b);
    }
  }
  // Two capacity changes on one bus at the same hour contradict each other.
  for (std::size_t i = 0; i < events.size(); ++i) {
    for (std::size_t j = i + 1; j < events.size(); ++j) {
      const auto& a = events[i];
      const auto& b = events[j];
      if (a.kind != EventKind::SolarCapacityChange || b.kind != EventKind::SolarCapacityChange || !a.overlaps(b)) {
        continue;
      }
      for (int x : a.buses) {
        for (int y : b.buses) {
          if (x == y) {
            throw ConfigError("capacity events " + std::to_string(i + 1) + " and " + std::to_string(j + 1) +
                              " overlap at bus " + std::to_string(x));
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Observability loss clears y1 (P, Q, Vm) and y2 (demand, solar) at the
/// listed buses. A capacity change scales true solar at the bus, re-solves
/// the power flow and re-measures y1 with the hour's stored noise; y2 and
/// y3 keep their pre-change values.
inline MeasurementSet apply_scenario_events(const power::Network& net, MeasurementSet ms,
                                            const std::vector<ScenarioEvent>& events) {
  detail::check_events(net.model, ms, events);
  const std::size_t nb = net.num_buses();
  for (const auto& e : events) {
    for (auto& rec : ms.hours) {
      if (!e.covers(rec.timestamp)) continue;
      if (e.kind == EventKind::ObservabilityLoss) {
        for (int b : e.buses) {
          const std::size_t pos = net.model.index_of(b);
          for (std::size_t q = 0; q < 3; ++q) rec.evidence.y1_available[q * nb + pos] = 0;
          for (std::size_t k = 0; k < ms.layout.num_loads(); ++k) {
            if (ms.layout.load_buses[k] != b) continue;
            rec.evidence.y2_available[static_cast<std::size_t>(fusion::FusionStateLayout::demand_index(k))] = 0;
            rec.evidence.y2_available[static_cast<std::size_t>(fusion::FusionStateLayout::solar_index(k))] = 0;
          }
        }
      } else {
        for (int b : e.buses) {
          const std::size_t k = ms.layout.load_slot(b);
          const Index s = fusion::FusionStateLayout::solar_index(k);
          const double added = (e.multiplier - 1.0) * rec.true_x2(s);
          rec.true_x2(s) += added;
          rec.targets.p(static_cast<Index>(ms.layout.load_positions[k])) += added;
        }
        detail::solve_truth(net, rec);
        detail::measure_grid(net, rec);
      }
    }
  }
  return ms;
}

}  // namespace gbpfusion::scenario
