#pragma once

#include <numeric>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "gbpfusion/bp/factor_graph.hpp"

namespace gbpfusion::bp {

/// Canonical (information) form of one factor around a linearization point.
///
/// J and h cover all connected variables in slot order. When the factor was
/// linearized from its measurement model, the whitened Jacobian W = L^{-1} F
/// and whitened residual w = L^{-1}(y - f(x)) are kept as well (J = W^T W,
/// h = W^T w); message elimination then works on the square-root form.
struct FactorLinearization {
  Matrix J;
  Vector h;
  Matrix sqrt_info;
  Vector sqrt_rhs;
  std::vector<Index> dims;
  std::vector<Index> offsets;

  bool has_sqrt() const noexcept { return sqrt_info.size() > 0; }
  Index dim() const noexcept { return h.size(); }

  static FactorLinearization from_information(Matrix J, Vector h, std::vector<Index> dims) {
    FactorLinearization lin;
    lin.J = symmetrize(J);
    lin.h = std::move(h);
    lin.set_dims(std::move(dims));
    return lin;
  }

  void set_dims(std::vector<Index> d) {
    dims = std::move(d);
    offsets.assign(dims.size(), 0);
    for (std::size_t i = 1; i < dims.size(); ++i) offsets[i] = offsets[i - 1] + dims[i - 1];
    const Index total = std::accumulate(dims.begin(), dims.end(), Index{0});
    if (total != h.size() || J.rows() != total || J.cols() != total) {
      throw ConfigError("linearization blocks do not match variable dimensions");
    }
  }
};

/// J = F^T R^{-1} F, h = F^T R^{-1} (y - f(xbar)).
inline FactorLinearization linearize_factor(const FactorSpec& factor, const Vector& xbar,
                                            std::vector<Index> dims) {
  const Index total = std::accumulate(dims.begin(), dims.end(), Index{0});
  if (xbar.size() != total) {
    throw ConfigError("factor '" + factor.id() + "': linearization point has dimension " +
                      std::to_string(xbar.size()) + ", expected " + std::to_string(total));
  }
  if (!xbar.allFinite()) throw LinearizationError(factor.id(), "non-finite linearization point");
  const Vector fx = factor.evaluate(xbar);
  if (fx.size() != factor.y().size()) {
    throw LinearizationError(factor.id(), "measurement function returned " + std::to_string(fx.size()) +
                                              " values, expected " + std::to_string(factor.y().size()));
  }
  if (!fx.allFinite()) throw LinearizationError(factor.id(), "non-finite f(x)");
  Matrix F;
  try {
    F = factor.jacobian(xbar);
  } catch (const NumericalError& e) {
    throw LinearizationError(factor.id(), e.what());
  }
  if (F.rows() != fx.size() || F.cols() != total) {
    throw LinearizationError(factor.id(), "Jacobian has the wrong shape");
  }
  if (!F.allFinite()) throw LinearizationError(factor.id(), "non-finite Jacobian");

  FactorLinearization lin;
  lin.sqrt_info = factor.whiten(F);
  lin.sqrt_rhs = factor.whiten(Vector(factor.y() - fx));
  lin.J = symmetrize(lin.sqrt_info.transpose() * lin.sqrt_info);
  lin.h = lin.sqrt_info.transpose() * lin.sqrt_rhs;
  lin.set_dims(std::move(dims));
  return lin;
}

inline std::vector<Index> factor_dims(const FactorGraph& graph, std::size_t factor) {
  std::vector<Index> dims;
  for (EdgeIndex e : graph.factor_edges(factor)) dims.push_back(graph.variable(graph.edges()[e].variable).dim);
  return dims;
}

/// Linearizes a graph factor at the current estimates of its variables.
inline FactorLinearization linearize_factor(const FactorGraph& graph, std::size_t factor) {
  return linearize_factor(graph.factor(factor), graph.stacked_estimate(factor), factor_dims(graph, factor));
}

namespace detail {

inline std::vector<Index> slot_indices(const FactorLinearization& lin, std::size_t slot) {
  std::vector<Index> idx(static_cast<std::size_t>(lin.dims[slot]));
  std::iota(idx.begin(), idx.end(), lin.offsets[slot]);
  return idx;
}

/// Schur-complement elimination on (J, h):
///   J_msg = J_tt - J_tO (J_OO + P_O + jitter I)^{-1} J_Ot
///   h_msg = h_t  - J_tO (J_OO + P_O + jitter I)^{-1} (h_O + h_in)
inline GaussianMessage eliminate_information(const FactorLinearization& lin, const std::vector<Index>& target,
                                             const std::vector<Index>& others, const Matrix& prior_J,
                                             const Vector& prior_h, double jitter, bool& singular) {
  const Matrix block = lin.J(others, others) + prior_J;
  SpdSolver solver(block, jitter);
  singular = !solver.ok();
  if (singular) return {};
  const Matrix cross = lin.J(target, others);
  const Vector rhs = lin.h(others) + prior_h;
  GaussianMessage msg;
  msg.J = symmetrize(lin.J(target, target) - cross * solver.solve(Matrix(cross.transpose())));
  msg.h = lin.h(target) - cross * solver.solve(rhs);
  return msg;
}

/// The same elimination performed on the whitened system
///   [ W_O  W_t | w      ]
///   [ S_O  0   | S_O^-T h_in ]
/// by Householder QR. The trailing triangle [B | b] gives J_msg = B^T B and
/// h_msg = B^T b, so the result is a Gram matrix and cannot lose
/// definiteness to cancellation between large, nearly equal terms.
inline GaussianMessage eliminate_sqrt(const FactorLinearization& lin, const std::vector<Index>& target,
                                      const std::vector<Index>& others, const Matrix& prior_J,
                                      const Vector& prior_h, double jitter, bool& singular) {
  const Index m = lin.sqrt_info.rows();
  const Index n_o = static_cast<Index>(others.size());
  const Index n_t = static_cast<Index>(target.size());
  Matrix shifted = prior_J;
  shifted.diagonal().array() += jitter;
  const SqrtFactor prior = psd_sqrt(shifted, jitter);

  const Index rows = std::max(m + n_o, n_o + n_t + 1);
  Matrix a = Matrix::Zero(rows, n_o + n_t + 1);
  a.block(0, 0, m, n_o) = lin.sqrt_info(Eigen::all, others);
  a.block(0, n_o, m, n_t) = lin.sqrt_info(Eigen::all, target);
  a.block(0, n_o + n_t, m, 1) = lin.sqrt_rhs;
  a.block(m, 0, n_o, n_o) = prior.root;
  a.block(m, n_o + n_t, n_o, 1) = prior.inverse_t * prior_h;

  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix& r = qr.matrixQR();

  // Squared diagonal of R over the eliminated columns equals the unpivoted
  // Cholesky pivots of J_OO + P_O + jitter I.
  double scale = 0.0;
  for (Index k = 0; k < n_o; ++k) scale = std::max(scale, a.col(k).squaredNorm() - jitter);
  const double floor = 2.0 * jitter + SpdSolver::kRelativePivotFloor * scale;
  singular = false;
  for (Index k = 0; k < n_o; ++k) {
    const double pivot = r(k, k) * r(k, k);
    if (!(pivot > floor)) singular = true;
  }
  if (singular) return {};

  const Matrix b = r.block(n_o, n_o, n_t, n_t).triangularView<Eigen::Upper>();
  const Vector rhs = r.block(n_o, n_o + n_t, n_t, 1);
  GaussianMessage msg;
  msg.J = symmetrize(b.transpose() * b);
  msg.h = b.transpose() * rhs;
  return msg;
}

}  // namespace detail

/// Factor-to-variable message for the variable in `target_slot`.
///
/// `incoming[k]` is the variable-to-factor message from slot k; the entry for
/// the target slot is ignored. All other connected variables are eliminated
/// jointly. With a single connected variable the factor's own (J, h) is
/// returned.
inline GaussianMessage eliminate_to_slot(const FactorLinearization& lin, std::size_t target_slot,
                                         const std::vector<const GaussianMessage*>& incoming, double jitter,
                                         const std::string& factor_id = {}, const std::string& variable_id = {}) {
  const std::vector<Index> target = detail::slot_indices(lin, target_slot);
  if (lin.dims.size() == 1) return {lin.h, lin.J};

  std::vector<Index> others;
  std::vector<std::size_t> other_slots;
  for (std::size_t s = 0; s < lin.dims.size(); ++s) {
    if (s == target_slot) continue;
    other_slots.push_back(s);
    const auto idx = detail::slot_indices(lin, s);
    others.insert(others.end(), idx.begin(), idx.end());
  }
  const Index n_o = static_cast<Index>(others.size());
  Matrix prior_J = Matrix::Zero(n_o, n_o);
  Vector prior_h = Vector::Zero(n_o);
  Index offset = 0;
  for (std::size_t s : other_slots) {
    const GaussianMessage& in = *incoming.at(s);
    const Index d = lin.dims[s];
    prior_J.block(offset, offset, d, d) = in.J;
    prior_h.segment(offset, d) = in.h;
    offset += d;
  }

  bool singular = false;
  GaussianMessage msg = lin.has_sqrt()
                            ? detail::eliminate_sqrt(lin, target, others, prior_J, prior_h, jitter, singular)
                            : detail::eliminate_information(lin, target, others, prior_J, prior_h, jitter, singular);
  if (singular || !msg.J.allFinite() || !msg.h.allFinite()) {
    throw EliminationSingularity(factor_id, variable_id);
  }
  return msg;
}

/// Sum of the factor-to-variable messages on every edge of the variable
/// except `target`. Reads only edges adjacent to the source variable.
template <typename Store>
GaussianMessage variable_to_factor(const FactorGraph& graph, const Store& store, EdgeIndex target) {
  const Edge& edge = graph.edges().at(target);
  GaussianMessage msg = GaussianMessage::zero(graph.variable(edge.variable).dim);
  for (EdgeIndex e : graph.variable_edges(edge.variable)) {
    if (e == target) continue;
    const GaussianMessage& in = store.to_variable(e);
    msg.h += in.h;
    msg.J += in.J;
  }
  return msg;
}

/// Factor-to-variable message along `target`, reading the variable-to-factor
/// messages on the factor's other edges.
template <typename Store>
GaussianMessage factor_to_variable(const FactorGraph& graph, const Store& store, EdgeIndex target,
                                   const FactorLinearization& lin, double jitter) {
  const Edge& edge = graph.edges().at(target);
  const auto& fedges = graph.factor_edges(edge.factor);
  std::vector<const GaussianMessage*> incoming(fedges.size(), nullptr);
  for (std::size_t s = 0; s < fedges.size(); ++s) {
    if (s != edge.slot) incoming[s] = &store.to_factor(fedges[s]);
  }
  return eliminate_to_slot(lin, edge.slot, incoming, jitter, graph.factor(edge.factor).id(),
                           graph.variable(edge.variable).id);
}

/// Message from `var_id` to `factor_id` computed from the graph's stored
/// messages.
inline GaussianMessage message_variable_to_factor(const FactorGraph& graph, const VariableId& var_id,
                                                  const FactorId& factor_id) {
  return variable_to_factor(graph, graph.messages(), graph.edge_between(factor_id, var_id));
}

inline GaussianMessage message_factor_to_variable(const FactorGraph& graph, const FactorId& factor_id,
                                                  const VariableId& var_id, const FactorLinearization& lin,
                                                  double jitter = 1e-12) {
  return factor_to_variable(graph, graph.messages(), graph.edge_between(factor_id, var_id), lin, jitter);
}

/// Result of combining all incoming factor messages at one variable.
struct MarginalUpdate {
  Vector delta;
  Vector mean;
  Matrix cov;
};

/// delta = (sum J)^{-1} (sum h), mean = x + delta, cov = (sum J)^{-1}.
/// Returns false when the summed information is singular after jitter.
template <typename Store>
bool try_update_marginal(const FactorGraph& graph, const Store& store, std::size_t var, double jitter,
                         MarginalUpdate& out) {
  const VariableNode& node = graph.variable(var);
  Matrix J = Matrix::Zero(node.dim, node.dim);
  Vector h = Vector::Zero(node.dim);
  for (EdgeIndex e : graph.variable_edges(var)) {
    J += store.to_variable(e).J;
    h += store.to_variable(e).h;
  }
  SpdSolver solver(symmetrize(J), jitter);
  if (!solver.ok()) return false;
  out.delta = solver.solve(h);
  if (!out.delta.allFinite()) return false;
  out.mean = node.x + out.delta;
  out.cov = solver.inverse();
  return true;
}

inline MarginalUpdate update_marginal(const FactorGraph& graph, const VariableId& var_id, double jitter = 1e-12) {
  MarginalUpdate out;
  if (!try_update_marginal(graph, graph.messages(), graph.variable_index(var_id), jitter, out)) {
    throw UnobservableVariable(var_id);
  }
  return out;
}

}  // namespace gbpfusion::bp
