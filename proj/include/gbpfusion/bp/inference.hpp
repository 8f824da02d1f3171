#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <vector>

#include "gbpfusion/bp/messages.hpp"
#include "gbpfusion/bp/schedule.hpp"

namespace gbpfusion::bp {

struct Marginal {
  Vector mean;
  Matrix cov;
};

/// Running symmetry / definiteness statistics over every committed message.
///
/// A message violates the check when ||J - J^T||_inf >= 1e-10 or the
/// smallest eigenvalue of its diagonally equilibrated form D^-1/2 J D^-1/2
/// (D = diag J) is below -1e-9. Equilibration is a congruence, so it keeps
/// the sign of every eigenvalue; it only removes the eps * ||J|| round-off
/// floor of the eigensolver. The raw smallest eigenvalue is tracked too.
struct MessageAudit {
  static constexpr double kAsymmetryTol = 1e-10;
  static constexpr double kEigenvalueTol = -1e-9;

  std::size_t checked = 0;
  std::size_t violations = 0;
  double max_asymmetry = 0.0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double min_scaled_eigenvalue = std::numeric_limits<double>::infinity();
  /// Messages whose raw smallest eigenvalue is below -1e-9, and the largest
  /// norm among them.
  std::size_t raw_eigenvalue_flags = 0;
  double max_flagged_norm = 0.0;

  void record(const GaussianMessage& msg) {
    ++checked;
    const double asym = gbpfusion::asymmetry(msg.J);
    const double eig = gbpfusion::min_eigenvalue(msg.J);
    const double scaled = gbpfusion::scaled_min_eigenvalue(msg.J);
    max_asymmetry = std::max(max_asymmetry, asym);
    min_eigenvalue = std::min(min_eigenvalue, eig);
    min_scaled_eigenvalue = std::min(min_scaled_eigenvalue, scaled);
    if (!(eig >= kEigenvalueTol)) {
      ++raw_eigenvalue_flags;
      max_flagged_norm = std::max(max_flagged_norm, msg.J.norm());
    }
    if (!(asym < kAsymmetryTol) || !(scaled >= kEigenvalueTol)) ++violations;
  }

  void merge(const MessageAudit& other) {
    checked += other.checked;
    violations += other.violations;
    max_asymmetry = std::max(max_asymmetry, other.max_asymmetry);
    min_eigenvalue = std::min(min_eigenvalue, other.min_eigenvalue);
    min_scaled_eigenvalue = std::min(min_scaled_eigenvalue, other.min_scaled_eigenvalue);
    raw_eigenvalue_flags += other.raw_eigenvalue_flags;
    max_flagged_norm = std::max(max_flagged_norm, other.max_flagged_norm);
  }
};

struct Diagnostics {
  /// Relinearization steps taken before the step norm fell below tol.
  int iterations = 0;
  /// Outer loops executed, including the one that confirmed convergence.
  int sweeps = 0;
  double final_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool loopy = false;
  std::vector<double> residual_history;
  MessageAudit audit;
};

struct InferenceResult {
  std::map<VariableId, Marginal> marginals;
  Diagnostics diagnostics;
};

/// Generalized Gaussian belief propagation with per-iteration relinearization.
///
/// Each outer iteration relinearizes every factor at the current estimates,
/// runs one full message schedule and moves every variable by its marginal
/// step. Stops when max_i ||delta x_i||_inf < tol. Non-convergence is
/// reported through `converged`, not thrown.
///
/// On loopy graphs messages persist between outer iterations: they are
/// re-expressed around the new linearization point, and factor-to-variable
/// messages are damped as new = (1 - a) computed + a previous. A variable
/// whose information is still singular keeps its estimate until the end of
/// the run; only then is UnobservableVariable thrown.
inline InferenceResult run_inference(FactorGraph& graph, const InferenceConfig& config) {
  config.validate();
  const Schedule schedule = schedule_messages(graph);
  const double damping = schedule.loopy ? config.damping : 0.0;
  const std::size_t nv = graph.num_variables();
  const std::size_t nf = graph.num_factors();

  InferenceResult result;
  Diagnostics& diag = result.diagnostics;
  diag.loopy = schedule.loopy;

  graph.reset_messages();
  MessageStore& store = graph.messages();
  std::vector<Vector> last_linearization(nv);
  for (std::size_t v = 0; v < nv; ++v) last_linearization[v] = graph.variable(v).x;

  auto audit = [&](const GaussianMessage& msg) {
    if (config.audit_messages) diag.audit.record(msg);
  };

  std::vector<char> pending(nv, 0);
  for (int iter = 1; iter <= config.max_outer_iters; ++iter) {
    // Stored messages are offsets around the previous linearization point.
    if (schedule.loopy && iter > 1) {
      for (EdgeIndex e = 0; e < graph.num_edges(); ++e) {
        const std::size_t v = graph.edges()[e].variable;
        const Vector shift = graph.variable(v).x - last_linearization[v];
        GaussianMessage& m = store.to_variable(e);
        m.h -= m.J * shift;
      }
    }
    for (std::size_t v = 0; v < nv; ++v) last_linearization[v] = graph.variable(v).x;

    std::vector<FactorLinearization> lins;
    lins.reserve(nf);
    for (std::size_t f = 0; f < nf; ++f) lins.push_back(linearize_factor(graph, f));

    if (!schedule.loopy) {
      for (const auto& step : schedule.order) {
        if (step.direction == Direction::VariableToFactor) {
          store.to_factor(step.edge) = variable_to_factor(graph, store, step.edge);
          audit(store.to_factor(step.edge));
        } else {
          const std::size_t f = graph.edges()[step.edge].factor;
          store.to_variable(step.edge) = factor_to_variable(graph, store, step.edge, lins[f], config.jitter);
          audit(store.to_variable(step.edge));
        }
      }
    } else {
      std::vector<GaussianMessage> batch(graph.num_edges());
      for (EdgeIndex e = 0; e < graph.num_edges(); ++e) batch[e] = variable_to_factor(graph, store, e);
      for (EdgeIndex e = 0; e < graph.num_edges(); ++e) {
        store.to_factor(e) = std::move(batch[e]);
        audit(store.to_factor(e));
      }
      for (EdgeIndex e = 0; e < graph.num_edges(); ++e) {
        const std::size_t f = graph.edges()[e].factor;
        batch[e] = factor_to_variable(graph, store, e, lins[f], config.jitter);
      }
      for (EdgeIndex e = 0; e < graph.num_edges(); ++e) {
        GaussianMessage& prev = store.to_variable(e);
        GaussianMessage next = std::move(batch[e]);
        if (damping > 0.0) {
          next.h = (1.0 - damping) * next.h + damping * prev.h;
          next.J = (1.0 - damping) * next.J + damping * prev.J;
        }
        prev = std::move(next);
        audit(prev);
      }
    }

    double residual = 0.0;
    bool any_pending = false;
    std::vector<MarginalUpdate> updates(nv);
    for (std::size_t v = 0; v < nv; ++v) {
      pending[v] = 0;
      if (!try_update_marginal(graph, store, v, config.jitter, updates[v])) {
        if (!schedule.loopy) throw UnobservableVariable(graph.variable(v).id);
        pending[v] = 1;
        any_pending = true;
        continue;
      }
      residual = std::max(residual, max_abs(updates[v].delta));
    }
    for (std::size_t v = 0; v < nv; ++v) {
      if (pending[v]) continue;
      VariableNode& node = graph.variable(v);
      node.x = updates[v].mean;
      node.marginal_mean = updates[v].mean;
      node.marginal_cov = updates[v].cov;
      if (!node.x.allFinite()) throw UnobservableVariable(node.id);
    }

    diag.sweeps = iter;
    diag.final_residual = residual;
    diag.residual_history.push_back(residual);
    if (!any_pending && residual < config.tol) {
      diag.converged = true;
      diag.iterations = iter - 1;
      break;
    }
    diag.iterations = iter;
  }

  for (std::size_t v = 0; v < nv; ++v) {
    if (pending[v]) throw UnobservableVariable(graph.variable(v).id);
  }
  for (const auto& node : graph.variables()) {
    result.marginals.emplace(node.id, Marginal{node.marginal_mean, node.marginal_cov});
  }
  return result;
}

}  // namespace gbpfusion::bp
