#pragma once

#include <string>
#include <vector>

#include "gbpfusion/power/network.hpp"

namespace gbpfusion::fusion {

inline constexpr const char* kGridVariable = "x1";
inline constexpr const char* kResourceVariable = "x2";

/// Load buses of the 14-bus experiments.
inline std::vector<int> default_load_buses() { return {3, 4, 5, 6, 9, 10, 11, 12, 13, 14}; }

/// Where everything lives in the two fusion variables.
///
/// x1 = [va (non-slack buses), vm (all buses)];
/// x2 = [demand_1, solar_1, demand_2, solar_2, ...] over `load_buses`.
struct FusionStateLayout {
  std::vector<int> load_buses;
  std::vector<std::size_t> load_positions;  // bus positions in the model
  Index x1_dim = 0;

  static FusionStateLayout for_model(const power::BusBranchModel& model,
                                     std::vector<int> load_buses = default_load_buses()) {
    FusionStateLayout layout;
    if (load_buses.empty()) throw ConfigError("at least one load bus is required");
    for (int id : load_buses) {
      if (!model.has_bus(id)) throw ConfigError("load bus " + std::to_string(id) + " is not in the network");
      const std::size_t pos = model.index_of(id);
      for (std::size_t p : layout.load_positions) {
        if (p == pos) throw ConfigError("load bus " + std::to_string(id) + " listed twice");
      }
      layout.load_positions.push_back(pos);
    }
    layout.load_buses = std::move(load_buses);
    layout.x1_dim = 2 * static_cast<Index>(model.num_buses()) - 1;
    return layout;
  }

  std::size_t num_loads() const { return load_buses.size(); }
  Index x2_dim() const { return 2 * static_cast<Index>(load_buses.size()); }
  static Index demand_index(std::size_t k) { return 2 * static_cast<Index>(k); }
  static Index solar_index(std::size_t k) { return 2 * static_cast<Index>(k) + 1; }

  /// Position of `bus_id` inside load_buses.
  std::size_t load_slot(int bus_id) const {
    for (std::size_t k = 0; k < load_buses.size(); ++k) {
      if (load_buses[k] == bus_id) return k;
    }
    throw ConfigError("bus " + std::to_string(bus_id) + " is not a load bus");
  }

  std::string entry_name(Index i) const {
    const auto k = static_cast<std::size_t>(i / 2);
    return std::string(i % 2 == 0 ? "demand" : "solar") + "_bus" + std::to_string(load_buses.at(k));
  }
};

}  // namespace gbpfusion::fusion
