#pragma once

#include <vector>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"

namespace gbpfusion::fusion {

/// Everything observed at one hour. Flags are 1 where the value may be used.
///
/// y1 follows power::full_selector order (P, Q, Vm at every bus). y2 and y3
/// follow the x2 layout. Values behind a cleared flag are never read.
struct HourlyEvidence {
  Vector y1;
  std::vector<char> y1_available;
  Vector y2;
  std::vector<char> y2_available;
  Vector y3_mean;
  Vector y3_variance;
  std::vector<char> y3_available;

  void validate(Index num_buses, Index x2_dim) const {
    if (y1.size() != 3 * num_buses || static_cast<Index>(y1_available.size()) != 3 * num_buses) {
      throw ConfigError("grid measurements have the wrong length");
    }
    if (y2.size() != x2_dim || static_cast<Index>(y2_available.size()) != x2_dim) {
      throw ConfigError("meter readings have the wrong length");
    }
    if (y3_mean.size() != x2_dim || y3_variance.size() != x2_dim ||
        static_cast<Index>(y3_available.size()) != x2_dim) {
      throw ConfigError("forecasts have the wrong length");
    }
  }

  static std::size_t count(const std::vector<char>& flags) {
    std::size_t n = 0;
    for (char f : flags) n += f ? 1 : 0;
    return n;
  }
};

}  // namespace gbpfusion::fusion
