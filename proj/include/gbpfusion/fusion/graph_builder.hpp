#pragma once

#include <memory>

#include "gbpfusion/bp/factor_graph.hpp"
#include "gbpfusion/fusion/evidence.hpp"
#include "gbpfusion/fusion/factors.hpp"

namespace gbpfusion::fusion {

struct FusionOptions {
  NoiseLevels noise;
  bool include_joint = true;
};

/// Selector rows of y1 whose flag is set.
inline power::Selector available_selector(std::size_t num_buses, const std::vector<char>& available) {
  const power::Selector full = power::full_selector(num_buses);
  power::Selector sel;
  for (std::size_t r = 0; r < full.size(); ++r) {
    if (available[r]) sel.push_back(full[r]);
  }
  return sel;
}

/// Starting point for x2: forecast where available, else the meter reading,
/// else zero.
inline Vector initial_resources(const FusionStateLayout& layout, const HourlyEvidence& ev) {
  Vector x2 = Vector::Zero(layout.x2_dim());
  for (Index i = 0; i < layout.x2_dim(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (ev.y3_available[k]) x2(i) = ev.y3_mean(i);
    else if (ev.y2_available[k]) x2(i) = ev.y2(i);
  }
  return x2;
}

/// The two-variable fusion graph: x1 (grid voltages) and x2 (demand / solar
/// per load bus) with the state estimation, smart meter, forecast and joint
/// factors. Masked rows are dropped; a source with no rows left is omitted.
inline bp::FactorGraph build_fusion_graph(std::shared_ptr<const power::Network> net, const FusionStateLayout& layout,
                                          const HourlyEvidence& ev, const FusionOptions& options = {}) {
  const auto nb = static_cast<Index>(net->num_buses());
  ev.validate(nb, layout.x2_dim());
  options.noise.validate();

  bp::FactorGraph graph;
  graph.add_variable(kGridVariable, net->indexer.flat_start());
  graph.add_variable(kResourceVariable, initial_resources(layout, ev));

  std::size_t data_factors = 0;
  const power::Selector sel = available_selector(net->num_buses(), ev.y1_available);
  if (!sel.empty()) {
    Vector y1(static_cast<Index>(sel.size()));
    Index r = 0;
    for (Index i = 0; i < 3 * nb; ++i) {
      if (ev.y1_available[static_cast<std::size_t>(i)]) y1(r++) = ev.y1(i);
    }
    graph.add_factor(make_state_estimation_factor(net, y1, sel, options.noise));
    ++data_factors;
  }
  if (HourlyEvidence::count(ev.y2_available) > 0) {
    graph.add_factor(make_meter_factor(layout, ev.y2, options.noise.meter_sd, &ev.y2_available));
    ++data_factors;
  }
  if (HourlyEvidence::count(ev.y3_available) > 0) {
    graph.add_factor(make_forecast_factor(layout, ev.y3_mean, ev.y3_variance, &ev.y3_available));
    ++data_factors;
  }
  if (data_factors == 0) throw ConfigError("no measurement data available for this hour");
  if (options.include_joint) graph.add_factor(make_joint_factor(net, layout, options.noise.constraint_variance));
  return graph;
}

}  // namespace gbpfusion::fusion
