#pragma once

// The stacked fusion problem written directly against the power model,
// without going through factor-graph types. State x = [x1; x2].

#include <memory>

#include "gbpfusion/fusion/evidence.hpp"
#include "gbpfusion/fusion/layout.hpp"
#include "gbpfusion/oracle/gauss_newton.hpp"
#include "gbpfusion/power/power_flow.hpp"

namespace gbpfusion::oracle {

struct FusionNoise {
  double power_sd = 0.01;
  double voltage_sd = 0.5e-3;
  double meter_sd = 0.02;
  double constraint_variance = 1e-10;
};

inline GlobalProblem build_fusion_problem(std::shared_ptr<const power::Network> net,
                                          const fusion::FusionStateLayout& layout, const fusion::HourlyEvidence& ev,
                                          const FusionNoise& noise = {}) {
  const auto nb = static_cast<Index>(net->num_buses());
  const Index n1 = layout.x1_dim;
  const Index n2 = layout.x2_dim();
  ev.validate(nb, n2);
  GlobalProblem problem;
  problem.state_dim = n1 + n2;

  // Grid measurements.
  power::Selector sel;
  std::vector<double> y1, r1;
  const power::Selector full = power::full_selector(net->num_buses());
  for (std::size_t r = 0; r < full.size(); ++r) {
    if (!ev.y1_available[r]) continue;
    sel.push_back(full[r]);
    y1.push_back(ev.y1(static_cast<Index>(r)));
    const double sd = full[r].quantity == power::Quantity::Vm ? noise.voltage_sd : noise.power_sd;
    r1.push_back(sd * sd);
  }
  if (!sel.empty()) {
    ProblemBlock b;
    b.name = "grid";
    b.y = Eigen::Map<const Vector>(y1.data(), static_cast<Index>(y1.size()));
    b.R = Eigen::Map<const Vector>(r1.data(), static_cast<Index>(r1.size())).asDiagonal();
    b.f = [net, sel, n1](const Vector& x) {
      return power::power_flow_equations(*net, net->indexer.to_state(x.head(n1)), sel);
    };
    b.jacobian = [net, sel, n1, n2](const Vector& x) {
      Matrix F = Matrix::Zero(static_cast<Index>(sel.size()), n1 + n2);
      F.leftCols(n1) = power::power_flow_jacobian(*net, net->indexer.to_state(x.head(n1)), sel);
      return F;
    };
    problem.measurements.push_back(std::move(b));
  }

  // Direct observations of x2 (meter and forecast).
  auto add_direct = [&](const char* name, const Vector& values, const std::vector<char>& flags,
                        const std::function<double(Index)>& variance) {
    std::vector<Index> rows;
    for (Index i = 0; i < n2; ++i) {
      if (flags[static_cast<std::size_t>(i)]) rows.push_back(n1 + i);
    }
    if (rows.empty()) return;
    ProblemBlock b;
    b.name = name;
    b.y.resize(static_cast<Index>(rows.size()));
    Vector var(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      b.y(static_cast<Index>(k)) = values(rows[k] - n1);
      var(static_cast<Index>(k)) = variance(rows[k] - n1);
    }
    b.R = var.asDiagonal();
    b.f = [rows](const Vector& x) { return Vector(x(rows)); };
    const Index n = n1 + n2;
    b.jacobian = [rows, n](const Vector&) {
      Matrix F = Matrix::Zero(static_cast<Index>(rows.size()), n);
      for (std::size_t k = 0; k < rows.size(); ++k) F(static_cast<Index>(k), rows[k]) = 1.0;
      return F;
    };
    problem.measurements.push_back(std::move(b));
  };
  add_direct("meter", ev.y2, ev.y2_available, [&](Index) { return noise.meter_sd * noise.meter_sd; });
  add_direct("forecast", ev.y3_mean, ev.y3_available,
             [&](Index i) { return ev.y3_variance(i); });

  // Physics constraint: injection minus scheduled generation equals
  // solar minus demand at each load bus.
  {
    const auto m = static_cast<Index>(layout.num_loads());
    power::Selector psel;
    Vector pg(m);
    for (std::size_t k = 0; k < layout.num_loads(); ++k) {
      psel.push_back({power::Quantity::P, layout.load_positions[k]});
      pg(static_cast<Index>(k)) = net->model.generation_p(layout.load_positions[k]);
    }
    ProblemBlock b;
    b.name = "coupling";
    b.y = Vector::Zero(m);
    b.R = noise.constraint_variance * Matrix::Identity(m, m);
    b.f = [net, psel, pg, n1, m](const Vector& x) {
      Vector g = power::power_flow_equations(*net, net->indexer.to_state(x.head(n1)), psel) - pg;
      for (Index k = 0; k < m; ++k) g(k) += x(n1 + 2 * k) - x(n1 + 2 * k + 1);
      return g;
    };
    b.jacobian = [net, psel, n1, n2, m](const Vector& x) {
      Matrix G = Matrix::Zero(m, n1 + n2);
      G.leftCols(n1) = power::power_flow_jacobian(*net, net->indexer.to_state(x.head(n1)), psel);
      for (Index k = 0; k < m; ++k) {
        G(k, n1 + 2 * k) = 1.0;
        G(k, n1 + 2 * k + 1) = -1.0;
      }
      return G;
    };
    problem.constraints.push_back(std::move(b));
  }
  return problem;
}

}  // namespace gbpfusion::oracle
