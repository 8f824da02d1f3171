#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <unordered_map>
#include <vector>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"

namespace gbpfusion::power {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

enum class BusType { PQ = 1, PV = 2, Slack = 3 };

/// Powers and shunts are stored in per-unit on the system base; the case
/// file carries MW / MVAr.
struct Bus {
  int id = 0;
  BusType type = BusType::PQ;
  double pd = 0.0;
  double qd = 0.0;
  double gs = 0.0;
  double bs = 0.0;
  int area = 1;
  double vm = 1.0;
  double va_deg = 0.0;
  double base_kv = 0.0;
  int zone = 1;
  double vmax = 1.1;
  double vmin = 0.9;
};

struct Generator {
  int bus = 0;
  double pg = 0.0;
  double qg = 0.0;
  double qmax = 0.0;
  double qmin = 0.0;
  double vg = 1.0;
  double mbase = 100.0;
  bool in_service = true;
  double pmax = 0.0;
  double pmin = 0.0;
};

struct Branch {
  int from = 0;
  int to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;
  double rate_a = 0.0;
  double rate_b = 0.0;
  double rate_c = 0.0;
  double tap = 1.0;  // 0 in the file means nominal
  double shift_deg = 0.0;
  bool in_service = true;
  double angmin = -360.0;
  double angmax = 360.0;
};

/// Bus-branch network description.
class BusBranchModel {
 public:
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Generator> generators;
  std::vector<Branch> branches;

  std::size_t num_buses() const { return buses.size(); }

  /// Position of bus `id` in `buses`.
  std::size_t index_of(int id) const {
    if (index_.size() != buses.size()) rebuild_index();
    auto it = index_.find(id);
    if (it == index_.end()) throw ConfigError("unknown bus id " + std::to_string(id));
    return it->second;
  }
  bool has_bus(int id) const {
    if (index_.size() != buses.size()) rebuild_index();
    return index_.contains(id);
  }

  std::size_t slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
      if (buses[i].type == BusType::Slack) return i;
    }
    throw ConfigError("network has no slack bus");
  }

  /// Scheduled generation at a bus (p.u.), summed over in-service units.
  double generation_p(std::size_t bus) const {
    double p = 0.0;
    for (const auto& g : generators) {
      if (g.in_service && g.bus == buses[bus].id) p += g.pg;
    }
    return p;
  }
  double generation_q(std::size_t bus) const {
    double q = 0.0;
    for (const auto& g : generators) {
      if (g.in_service && g.bus == buses[bus].id) q += g.qg;
    }
    return q;
  }

  /// Voltage magnitude held at a bus by its generator (PV and slack), or the
  /// bus's stored magnitude otherwise.
  double voltage_setpoint(std::size_t bus) const {
    for (const auto& g : generators) {
      if (g.in_service && g.bus == buses[bus].id && buses[bus].type != BusType::PQ) return g.vg;
    }
    return buses[bus].vm;
  }

  void validate() const {
    if (buses.empty()) throw ConfigError("network has no buses");
    if (!(base_mva > 0.0)) throw ConfigError("baseMVA must be positive");
    std::size_t slack = 0;
    std::unordered_map<int, int> seen;
    for (const auto& b : buses) {
      if (++seen[b.id] > 1) throw ConfigError("duplicate bus id " + std::to_string(b.id));
      if (b.type == BusType::Slack) ++slack;
    }
    if (slack != 1) throw ConfigError("network must have exactly one slack bus, found " + std::to_string(slack));
    for (const auto& br : branches) {
      if (!seen.contains(br.from) || !seen.contains(br.to)) {
        throw ConfigError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " references an unknown bus");
      }
      if (br.r == 0.0 && br.x == 0.0) {
        throw ConfigError("branch " + std::to_string(br.from) + "-" + std::to_string(br.to) +
                          " has zero series impedance");
      }
    }
    for (const auto& g : generators) {
      if (!seen.contains(g.bus)) throw ConfigError("generator at unknown bus " + std::to_string(g.bus));
    }
  }

 private:
  void rebuild_index() const {
    index_.clear();
    for (std::size_t i = 0; i < buses.size(); ++i) index_[buses[i].id] = i;
  }
  mutable std::unordered_map<int, std::size_t> index_;
};

/// Polar bus voltages. Angles in radians.
struct GridState {
  Vector vm;
  Vector va;

  static GridState flat(std::size_t n) { return {Vector::Ones(static_cast<Index>(n)), Vector::Zero(static_cast<Index>(n))}; }
};

/// Maps GridState to the estimation vector [va (non-slack buses), vm (all buses)]
/// with the slack angle pinned to zero.
class StateIndexer {
 public:
  StateIndexer(std::size_t num_buses, std::size_t slack) : n_(static_cast<Index>(num_buses)), slack_(static_cast<Index>(slack)) {}
  explicit StateIndexer(const BusBranchModel& model) : StateIndexer(model.num_buses(), model.slack_index()) {}

  Index dim() const { return 2 * n_ - 1; }
  Index num_buses() const { return n_; }
  Index slack() const { return slack_; }

  /// Column of bus i's angle, or -1 for the slack.
  Index angle_index(Index bus) const {
    if (bus == slack_) return -1;
    return bus < slack_ ? bus : bus - 1;
  }
  Index magnitude_index(Index bus) const { return n_ - 1 + bus; }

  Vector to_vector(const GridState& s) const {
    Vector x(dim());
    for (Index i = 0; i < n_; ++i) {
      const Index a = angle_index(i);
      if (a >= 0) x(a) = s.va(i);
      x(magnitude_index(i)) = s.vm(i);
    }
    return x;
  }

  GridState to_state(const Vector& x) const {
    if (x.size() != dim()) throw ConfigError("grid state vector has the wrong dimension");
    GridState s{Vector(n_), Vector(n_)};
    for (Index i = 0; i < n_; ++i) {
      const Index a = angle_index(i);
      s.va(i) = a >= 0 ? x(a) : 0.0;
      s.vm(i) = x(magnitude_index(i));
    }
    return s;
  }

  Vector flat_start() const { return to_vector(GridState::flat(static_cast<std::size_t>(n_))); }

 private:
  Index n_;
  Index slack_;
};

/// Bus admittance matrix with line charging, off-nominal taps, phase shifts
/// and bus shunts. Out-of-service branches are skipped.
inline ComplexMatrix build_admittance(const BusBranchModel& model) {
  model.validate();
  const auto n = static_cast<Index>(model.num_buses());
  ComplexMatrix y = ComplexMatrix::Zero(n, n);
  for (const auto& br : model.branches) {
    if (!br.in_service) continue;
    const auto f = static_cast<Index>(model.index_of(br.from));
    const auto t = static_cast<Index>(model.index_of(br.to));
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex ytt = ys + Complex(0.0, br.b / 2.0);
    const double tap = br.tap == 0.0 ? 1.0 : br.tap;
    const Complex ratio = std::polar(tap, br.shift_deg * std::numbers::pi / 180.0);
    y(f, f) += ytt / (tap * tap);
    y(t, t) += ytt;
    y(f, t) += -ys / std::conj(ratio);
    y(t, f) += -ys / ratio;
  }
  for (Index i = 0; i < n; ++i) {
    const auto& b = model.buses[static_cast<std::size_t>(i)];
    y(i, i) += Complex(b.gs, b.bs);
  }
  return y;
}

/// A validated model together with its admittance matrix.
struct Network {
  BusBranchModel model;
  ComplexMatrix ybus;
  StateIndexer indexer;

  explicit Network(BusBranchModel m)
      : model(std::move(m)), ybus(build_admittance(model)), indexer(model) {}

  std::size_t num_buses() const { return model.num_buses(); }
};

}  // namespace gbpfusion::power
