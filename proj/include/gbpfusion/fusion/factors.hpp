#pragma once

#include <memory>
#include <vector>

#include "gbpfusion/bp/factor_graph.hpp"
#include "gbpfusion/fusion/layout.hpp"
#include "gbpfusion/power/power_flow.hpp"

namespace gbpfusion::fusion {

struct NoiseLevels {
  double power_sd = 0.01;      // P and Q measurements, p.u.
  double voltage_sd = 0.5e-3;  // Vm measurements, p.u.
  double meter_sd = 0.02;      // smart meter readings, p.u.
  double constraint_variance = 1e-10;

  void validate() const {
    if (!(power_sd > 0.0) || !(voltage_sd > 0.0) || !(meter_sd > 0.0) || !(constraint_variance > 0.0)) {
      throw ConfigError("noise levels must be positive");
    }
  }
};

/// Diagonal SE noise for the selected rows.
inline Matrix state_estimation_noise(const power::Selector& sel, const NoiseLevels& noise) {
  Vector d(static_cast<Index>(sel.size()));
  for (std::size_t r = 0; r < sel.size(); ++r) {
    const double sd = sel[r].quantity == power::Quantity::Vm ? noise.voltage_sd : noise.power_sd;
    d(static_cast<Index>(r)) = sd * sd;
  }
  return d.asDiagonal();
}

/// y1 = h(x1) + e1 over the selected P / Q / Vm quantities.
inline bp::FactorSpec make_state_estimation_factor(std::shared_ptr<const power::Network> net, const Vector& y1,
                                                   const power::Selector& sel, const NoiseLevels& noise = {}) {
  if (sel.empty()) throw ConfigError("state estimation factor needs at least one measurement");
  if (static_cast<Index>(sel.size()) != y1.size()) {
    throw ConfigError("state estimation readings do not match the selector");
  }
  noise.validate();
  auto f = [net, sel](const Vector& x) {
    return power::power_flow_equations(*net, net->indexer.to_state(x), sel);
  };
  auto jac = [net, sel](const Vector& x) {
    return power::power_flow_jacobian(*net, net->indexer.to_state(x), sel);
  };
  return bp::FactorSpec("state_estimation", {kGridVariable}, f, y1, state_estimation_noise(sel, noise), jac);
}

namespace detail {

/// Identity rows of x2 restricted to `rows`.
inline bp::FactorSpec identity_factor(const char* id, const FusionStateLayout& layout, const std::vector<Index>& rows,
                                      const Vector& y, const Vector& variance) {
  const Index n = layout.x2_dim();
  Matrix S = Matrix::Zero(static_cast<Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) S(static_cast<Index>(r), rows[r]) = 1.0;
  return bp::FactorSpec(
      id, {kResourceVariable}, [S](const Vector& x) { return Vector(S * x); }, y, variance.asDiagonal(),
      [S](const Vector&) { return S; });
}

inline std::vector<Index> available_rows(Index n, const std::vector<char>* available) {
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) {
    if (!available || (*available)[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  return rows;
}

}  // namespace detail

/// y2 = x2 + e2 with e2 ~ N(0, sd^2 I). Entries whose `available` flag is
/// false are left out (their readings are never read).
inline bp::FactorSpec make_meter_factor(const FusionStateLayout& layout, const Vector& readings, double sd,
                                        const std::vector<char>* available = nullptr) {
  if (readings.size() != layout.x2_dim()) throw ConfigError("meter readings have the wrong length");
  if (available && static_cast<Index>(available->size()) != layout.x2_dim()) {
    throw ConfigError("meter mask has the wrong length");
  }
  if (!(sd > 0.0)) throw ConfigError("meter noise sd must be positive");
  const auto rows = detail::available_rows(layout.x2_dim(), available);
  if (rows.empty()) throw ConfigError("meter factor has no available readings");
  Vector y(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) y(static_cast<Index>(r)) = readings(rows[r]);
  return detail::identity_factor("smart_meter", layout, rows, y,
                                 Vector::Constant(static_cast<Index>(rows.size()), sd * sd));
}

/// y3 = x2 + e3 with a per-entry forecast variance.
inline bp::FactorSpec make_forecast_factor(const FusionStateLayout& layout, const Vector& forecasts,
                                           const Vector& variance, const std::vector<char>* available = nullptr) {
  if (forecasts.size() != layout.x2_dim() || variance.size() != layout.x2_dim()) {
    throw ConfigError("forecasts have the wrong length");
  }
  if (available && static_cast<Index>(available->size()) != layout.x2_dim()) {
    throw ConfigError("forecast mask has the wrong length");
  }
  const auto rows = detail::available_rows(layout.x2_dim(), available);
  if (rows.empty()) throw ConfigError("forecast factor has no available entries");
  Vector y(static_cast<Index>(rows.size())), var(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = variance(rows[r]);
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("forecast variance must be positive and finite");
    y(static_cast<Index>(r)) = forecasts(rows[r]);
    var(static_cast<Index>(r)) = v;
  }
  return detail::identity_factor("forecast", layout, rows, y, var);
}

/// Residual of the coupling constraint at each load bus k:
///   P_inj,k(x1) - P_gen,k - (solar_k - demand_k)
/// with generation-positive injections and the bus's scheduled generation
/// removed. Zero on physically consistent (x1, x2).
inline Vector joint_residual(const power::Network& net, const FusionStateLayout& layout, const Vector& x1,
                             const Vector& x2) {
  power::Selector sel;
  for (std::size_t pos : layout.load_positions) sel.push_back({power::Quantity::P, pos});
  const Vector p = power::power_flow_equations(net, net.indexer.to_state(x1), sel);
  Vector r(static_cast<Index>(layout.num_loads()));
  for (std::size_t k = 0; k < layout.num_loads(); ++k) {
    const auto i = static_cast<Index>(k);
    r(i) = p(i) - net.model.generation_p(layout.load_positions[k]) -
           (x2(FusionStateLayout::solar_index(k)) - x2(FusionStateLayout::demand_index(k)));
  }
  return r;
}

/// 0 = f41(x1) - F42 x2 + e4 over (x1, x2); one row per load bus.
inline bp::FactorSpec make_joint_factor(std::shared_ptr<const power::Network> net, const FusionStateLayout& layout,
                                        double constraint_variance = 1e-10) {
  if (!(constraint_variance > 0.0)) throw ConfigError("constraint variance must be positive");
  for (int id : layout.load_buses) {
    if (!net->model.has_bus(id)) throw ConfigError("load bus " + std::to_string(id) + " is not in the network");
  }
  const Index n1 = layout.x1_dim;
  const Index n2 = layout.x2_dim();
  const auto m = static_cast<Index>(layout.num_loads());
  power::Selector sel;
  for (std::size_t pos : layout.load_positions) sel.push_back({power::Quantity::P, pos});

  auto f = [net, layout, n1, n2](const Vector& x) {
    return joint_residual(*net, layout, x.head(n1), x.segment(n1, n2));
  };
  auto jac = [net, sel, n1, n2, m](const Vector& x) {
    Matrix F = Matrix::Zero(m, n1 + n2);
    F.leftCols(n1) = power::power_flow_jacobian(*net, net->indexer.to_state(x.head(n1)), sel);
    for (Index k = 0; k < m; ++k) {
      F(k, n1 + 2 * k) = 1.0;       // demand
      F(k, n1 + 2 * k + 1) = -1.0;  // solar
    }
    return F;
  };
  return bp::FactorSpec("joint", {kGridVariable, kResourceVariable}, f, Vector::Zero(m),
                        constraint_variance * Matrix::Identity(m, m), jac);
}

}  // namespace gbpfusion::fusion
