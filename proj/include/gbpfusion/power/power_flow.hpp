#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "gbpfusion/power/network.hpp"

namespace gbpfusion::power {

enum class Quantity { P, Q, Vm };

inline const char* quantity_name(Quantity q) {
  switch (q) {
    case Quantity::P: return "P";
    case Quantity::Q: return "Q";
    case Quantity::Vm: return "Vm";
  }
  return "?";
}

/// One measured quantity at a bus (bus given as position in the model).
struct MeasurementPoint {
  Quantity quantity = Quantity::P;
  std::size_t bus = 0;

  bool operator==(const MeasurementPoint&) const = default;
};

using Selector = std::vector<MeasurementPoint>;

/// P at every bus, then Q at every bus, then Vm at every bus.
inline Selector full_selector(std::size_t num_buses) {
  Selector s;
  s.reserve(3 * num_buses);
  for (Quantity q : {Quantity::P, Quantity::Q, Quantity::Vm}) {
    for (std::size_t i = 0; i < num_buses; ++i) s.push_back({q, i});
  }
  return s;
}

namespace detail {

inline Eigen::VectorXcd complex_voltages(const GridState& s) {
  Eigen::VectorXcd v(s.vm.size());
  for (Index i = 0; i < s.vm.size(); ++i) v(i) = std::polar(s.vm(i), s.va(i));
  return v;
}

inline void check_selector(const Network& net, const Selector& sel) {
  for (const auto& m : sel) {
    if (m.bus >= net.num_buses()) {
      throw ConfigError("selector references bus position " + std::to_string(m.bus) + " outside the network");
    }
  }
}

inline void check_state(const Network& net, const GridState& s) {
  const auto n = static_cast<Index>(net.num_buses());
  if (s.vm.size() != n || s.va.size() != n) throw ConfigError("grid state has the wrong number of buses");
}

}  // namespace detail

/// Complex power injected into the network at every bus, S = V * conj(Y V)
/// (generation positive).
inline Eigen::VectorXcd bus_injections(const Network& net, const GridState& s) {
  detail::check_state(net, s);
  const Eigen::VectorXcd v = detail::complex_voltages(s);
  const Eigen::VectorXcd i = net.ybus * v;
  return v.cwiseProduct(i.conjugate());
}

/// Selected P, Q and Vm values, in selector order.
inline Vector power_flow_equations(const Network& net, const GridState& s, const Selector& sel) {
  detail::check_selector(net, sel);
  const Eigen::VectorXcd inj = bus_injections(net, s);
  Vector out(static_cast<Index>(sel.size()));
  for (std::size_t r = 0; r < sel.size(); ++r) {
    const auto b = static_cast<Index>(sel[r].bus);
    switch (sel[r].quantity) {
      case Quantity::P: out(static_cast<Index>(r)) = inj(b).real(); break;
      case Quantity::Q: out(static_cast<Index>(r)) = inj(b).imag(); break;
      case Quantity::Vm: out(static_cast<Index>(r)) = s.vm(b); break;
    }
  }
  return out;
}

/// Partials of the selected quantities with respect to the estimation vector
/// [va (non-slack), vm].
inline Matrix power_flow_jacobian(const Network& net, const GridState& s, const Selector& sel) {
  detail::check_selector(net, sel);
  detail::check_state(net, s);
  const auto n = static_cast<Index>(net.num_buses());
  const Eigen::VectorXcd v = detail::complex_voltages(s);
  const Eigen::VectorXcd ibus = net.ybus * v;
  const Complex j(0.0, 1.0);

  // dS/dVa = j diag(V) conj(diag(I) - Y diag(V))
  // dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
  Eigen::MatrixXcd dva(n, n), dvm(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      const Complex unit = v(c) / s.vm(c);
      Complex a = -net.ybus(r, c) * v(c);
      Complex m = v(r) * std::conj(net.ybus(r, c) * unit);
      if (r == c) {
        a += ibus(r);
        m += std::conj(ibus(r)) * unit;
      }
      dva(r, c) = j * v(r) * std::conj(a);
      dvm(r, c) = m;
    }
  }

  const StateIndexer& idx = net.indexer;
  Matrix F = Matrix::Zero(static_cast<Index>(sel.size()), idx.dim());
  for (std::size_t k = 0; k < sel.size(); ++k) {
    const auto row = static_cast<Index>(k);
    const auto b = static_cast<Index>(sel[k].bus);
    if (sel[k].quantity == Quantity::Vm) {
      F(row, idx.magnitude_index(b)) = 1.0;
      continue;
    }
    const bool real = sel[k].quantity == Quantity::P;
    for (Index c = 0; c < n; ++c) {
      const Index a = idx.angle_index(c);
      if (a >= 0) F(row, a) = real ? dva(b, c).real() : dva(b, c).imag();
      F(row, idx.magnitude_index(c)) = real ? dvm(b, c).real() : dvm(b, c).imag();
    }
  }
  return F;
}

/// Net injection targets per bus position (p.u., generation positive) and the
/// voltage magnitudes held at PV and slack buses.
struct PowerFlowTargets {
  Vector p;
  Vector q;
  Vector vm_setpoint;
};

/// Scheduled generation minus case-file load at every bus.
inline PowerFlowTargets base_case_targets(const BusBranchModel& model) {
  const auto n = static_cast<Index>(model.num_buses());
  PowerFlowTargets t{Vector(n), Vector(n), Vector(n)};
  for (Index i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(i);
    t.p(i) = model.generation_p(b) - model.buses[b].pd;
    t.q(i) = model.generation_q(b) - model.buses[b].qd;
    t.vm_setpoint(i) = model.voltage_setpoint(b);
  }
  return t;
}

struct PowerFlowReport {
  int iterations = 0;
  double mismatch = 0.0;
};

/// Newton-Raphson power flow from a flat start (angles 0, PQ magnitudes 1,
/// PV and slack magnitudes at their setpoints). Converges when the max-norm
/// mismatch of the specified P (non-slack) and Q (PQ) targets is below 1e-8.
inline GridState solve_power_flow(const Network& net, const PowerFlowTargets& targets,
                                  PowerFlowReport* report = nullptr, double tolerance = 1e-8,
                                  int max_iterations = 30) {
  const auto n = static_cast<Index>(net.num_buses());
  if (targets.p.size() != n || targets.q.size() != n || targets.vm_setpoint.size() != n) {
    throw ConfigError("power flow targets have the wrong number of buses");
  }
  if (!targets.p.allFinite() || !targets.q.allFinite() || !targets.vm_setpoint.allFinite()) {
    throw ConfigError("power flow targets are not finite");
  }
  const auto& buses = net.model.buses;
  std::vector<Index> pvpq, pq;
  for (Index i = 0; i < n; ++i) {
    const BusType t = buses[static_cast<std::size_t>(i)].type;
    if (t != BusType::Slack) pvpq.push_back(i);
    if (t == BusType::PQ) pq.push_back(i);
  }
  const auto npv = static_cast<Index>(pvpq.size());
  const auto npq = static_cast<Index>(pq.size());

  GridState s = GridState::flat(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (buses[static_cast<std::size_t>(i)].type != BusType::PQ) s.vm(i) = targets.vm_setpoint(i);
  }

  Selector sel;
  for (Index i : pvpq) sel.push_back({Quantity::P, static_cast<std::size_t>(i)});
  for (Index i : pq) sel.push_back({Quantity::Q, static_cast<std::size_t>(i)});
  Vector target(npv + npq);
  for (Index k = 0; k < npv; ++k) target(k) = targets.p(pvpq[static_cast<std::size_t>(k)]);
  for (Index k = 0; k < npq; ++k) target(npv + k) = targets.q(pq[static_cast<std::size_t>(k)]);

  // Columns of the unknowns inside the full estimation Jacobian.
  const StateIndexer& idx = net.indexer;
  std::vector<Index> cols;
  for (Index i : pvpq) cols.push_back(idx.angle_index(i));
  for (Index i : pq) cols.push_back(idx.magnitude_index(i));

  double mismatch = 0.0;
  for (int it = 0; it <= max_iterations; ++it) {
    const Vector f = target - power_flow_equations(net, s, sel);
    mismatch = f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
    if (!std::isfinite(mismatch)) break;
    if (mismatch < tolerance) {
      if (report) *report = {it, mismatch};
      return s;
    }
    if (it == max_iterations) break;
    const Matrix J = power_flow_jacobian(net, s, sel)(Eigen::all, cols);
    Eigen::PartialPivLU<Matrix> lu(J);
    const Vector dx = lu.solve(f);
    if (!dx.allFinite()) break;
    for (Index k = 0; k < npv; ++k) s.va(pvpq[static_cast<std::size_t>(k)]) += dx(k);
    for (Index k = 0; k < npq; ++k) s.vm(pq[static_cast<std::size_t>(k)]) += dx(npv + k);
  }
  if (report) *report = {max_iterations, mismatch};
  throw PowerFlowDiverged(max_iterations, mismatch);
}

}  // namespace gbpfusion::power
