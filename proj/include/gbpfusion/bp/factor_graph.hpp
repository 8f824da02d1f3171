#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"
#include "gbpfusion/oracle/numdiff.hpp"

namespace gbpfusion::bp {

using VariableId = std::string;
using FactorId = std::string;
using EdgeIndex = std::size_t;

using MeasurementFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<Matrix(const Vector&)>;

/// A named block of the state.
///
/// `x` is the current estimate and the point every connected factor is
/// linearized at. `marginal_mean` / `marginal_cov` are populated by inference.
struct VariableNode {
  VariableId id;
  Index dim = 0;
  Vector x;
  Vector marginal_mean;
  Matrix marginal_cov;
};

/// Information-form Gaussian message along one directed edge.
struct GaussianMessage {
  Vector h;
  Matrix J;

  static GaussianMessage zero(Index dim) { return {Vector::Zero(dim), Matrix::Zero(dim, dim)}; }
  Index dim() const { return h.size(); }
};

/// Measurement block y = f(x_vars) + e, e ~ N(0, R).
///
/// The measurement function receives the connected variables concatenated in
/// `vars` order. Without an analytic Jacobian, central finite differences are
/// used.
class FactorSpec {
 public:
  FactorSpec(FactorId id, std::vector<VariableId> vars, MeasurementFn f, Vector y, Matrix noise,
             JacobianFn jacobian = {})
      : id_(std::move(id)),
        vars_(std::move(vars)),
        f_(std::move(f)),
        jacobian_(std::move(jacobian)),
        y_(std::move(y)),
        noise_(std::move(noise)) {
    if (vars_.empty()) throw ConfigError("factor '" + id_ + "' has no variables");
    std::unordered_set<VariableId> seen;
    for (const auto& v : vars_) {
      if (!seen.insert(v).second) {
        throw ConfigError("factor '" + id_ + "' lists variable '" + v + "' twice");
      }
    }
    if (!f_) throw ConfigError("factor '" + id_ + "' has no measurement function");
    if (noise_.rows() != noise_.cols() || noise_.rows() != y_.size()) {
      throw ConfigError("factor '" + id_ + "': noise covariance must be square with the dimension of y");
    }
    if (y_.size() == 0) throw ConfigError("factor '" + id_ + "' has an empty observation");
    if (!y_.allFinite() || !noise_.allFinite()) {
      throw ConfigError("factor '" + id_ + "': non-finite observation or noise covariance");
    }
    if (asymmetry(noise_) > 1e-12 * std::max(1.0, noise_.cwiseAbs().maxCoeff())) {
      throw ConfigError("factor '" + id_ + "': noise covariance is not symmetric");
    }
    noise_llt_.compute(noise_);
    if (noise_llt_.info() != Eigen::Success) {
      throw ConfigError("factor '" + id_ + "': noise covariance is not positive definite");
    }
  }

  const FactorId& id() const noexcept { return id_; }
  const std::vector<VariableId>& vars() const noexcept { return vars_; }
  const Vector& y() const noexcept { return y_; }
  const Matrix& noise() const noexcept { return noise_; }
  bool has_analytic_jacobian() const noexcept { return static_cast<bool>(jacobian_); }

  Vector evaluate(const Vector& x) const { return f_(x); }

  Matrix jacobian(const Vector& x) const {
    if (jacobian_) return jacobian_(x);
    return oracle::finite_difference_jacobian(f_, x);
  }

  /// L^{-1} m where R = L L^T.
  Matrix whiten(const Matrix& m) const { return noise_llt_.matrixL().solve(m); }
  Vector whiten(const Vector& v) const { return noise_llt_.matrixL().solve(v); }

 private:
  FactorId id_;
  std::vector<VariableId> vars_;
  MeasurementFn f_;
  JacobianFn jacobian_;
  Vector y_;
  Matrix noise_;
  Eigen::LLT<Matrix> noise_llt_;
};

/// Tunables of the outer relinearization loop.
struct InferenceConfig {
  int max_outer_iters = 50;
  double tol = 1e-6;
  double damping = 0.5;   // only applied on loopy graphs
  double jitter = 1e-12;
  unsigned long long seed = 0;
  bool audit_messages = false;

  void validate() const {
    if (max_outer_iters < 1) throw ConfigError("max_outer_iters must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("tol must be > 0");
    if (!(damping >= 0.0 && damping < 1.0)) throw ConfigError("damping must lie in [0, 1)");
    if (!(jitter >= 0.0)) throw ConfigError("jitter must be >= 0");
  }
};

/// One factor-variable adjacency. `slot` is the position of the variable in
/// the factor's `vars` list.
struct Edge {
  std::size_t factor;
  std::size_t slot;
  std::size_t variable;
};

/// Message storage indexed by edge, one slot per direction.
class MessageStore {
 public:
  void reset(const std::vector<Edge>& edges, const std::vector<VariableNode>& vars) {
    to_variable_.clear();
    to_factor_.clear();
    for (const auto& e : edges) {
      to_variable_.push_back(GaussianMessage::zero(vars[e.variable].dim));
      to_factor_.push_back(GaussianMessage::zero(vars[e.variable].dim));
    }
  }

  const GaussianMessage& to_variable(EdgeIndex e) const { return to_variable_.at(e); }
  const GaussianMessage& to_factor(EdgeIndex e) const { return to_factor_.at(e); }
  GaussianMessage& to_variable(EdgeIndex e) { return to_variable_.at(e); }
  GaussianMessage& to_factor(EdgeIndex e) { return to_factor_.at(e); }

 private:
  std::vector<GaussianMessage> to_variable_;
  std::vector<GaussianMessage> to_factor_;
};

/// Bipartite graph of variable blocks and measurement factors.
///
/// Variables and factors keep insertion order, which fixes the message
/// schedule and therefore makes inference deterministic.
class FactorGraph {
 public:
  void add_variable(const VariableId& id, Vector initial) {
    if (variable_index_.contains(id)) throw GraphError("duplicate variable '" + id + "'");
    if (initial.size() < 1) throw GraphError("variable '" + id + "' must have dimension >= 1");
    if (!initial.allFinite()) throw GraphError("variable '" + id + "' has a non-finite initial value");
    VariableNode node;
    node.id = id;
    node.dim = initial.size();
    node.x = std::move(initial);
    variable_index_.emplace(id, variables_.size());
    variables_.push_back(std::move(node));
    variable_edges_.emplace_back();
    messages_.reset(edges_, variables_);
  }

  void add_factor(FactorSpec factor) {
    if (factor_index_.contains(factor.id())) {
      throw GraphError("duplicate factor '" + factor.id() + "'");
    }
    std::vector<std::size_t> var_indices;
    for (const auto& v : factor.vars()) {
      auto it = variable_index_.find(v);
      if (it == variable_index_.end()) {
        throw GraphError("factor '" + factor.id() + "' references unknown variable '" + v + "'");
      }
      var_indices.push_back(it->second);
    }
    const std::size_t fi = factors_.size();
    factor_index_.emplace(factor.id(), fi);
    factors_.push_back(std::move(factor));
    factor_edges_.emplace_back();
    for (std::size_t slot = 0; slot < var_indices.size(); ++slot) {
      const EdgeIndex e = edges_.size();
      edges_.push_back({fi, slot, var_indices[slot]});
      factor_edges_[fi].push_back(e);
      variable_edges_[var_indices[slot]].push_back(e);
    }
    messages_.reset(edges_, variables_);
  }

  std::size_t num_variables() const noexcept { return variables_.size(); }
  std::size_t num_factors() const noexcept { return factors_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  const std::vector<VariableNode>& variables() const noexcept { return variables_; }
  const std::vector<FactorSpec>& factors() const noexcept { return factors_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  const VariableNode& variable(std::size_t i) const { return variables_.at(i); }
  VariableNode& variable(std::size_t i) { return variables_.at(i); }
  const VariableNode& variable(const VariableId& id) const { return variables_[variable_index(id)]; }
  VariableNode& variable(const VariableId& id) { return variables_[variable_index(id)]; }
  const FactorSpec& factor(std::size_t i) const { return factors_.at(i); }
  const FactorSpec& factor(const FactorId& id) const { return factors_[factor_index(id)]; }

  std::size_t variable_index(const VariableId& id) const {
    auto it = variable_index_.find(id);
    if (it == variable_index_.end()) throw GraphError("unknown variable '" + id + "'");
    return it->second;
  }
  std::size_t factor_index(const FactorId& id) const {
    auto it = factor_index_.find(id);
    if (it == factor_index_.end()) throw GraphError("unknown factor '" + id + "'");
    return it->second;
  }
  bool has_variable(const VariableId& id) const { return variable_index_.contains(id); }
  bool has_factor(const FactorId& id) const { return factor_index_.contains(id); }

  /// Edges of a factor, in slot order.
  const std::vector<EdgeIndex>& factor_edges(std::size_t factor) const { return factor_edges_.at(factor); }
  /// Edges of a variable, in factor insertion order.
  const std::vector<EdgeIndex>& variable_edges(std::size_t var) const { return variable_edges_.at(var); }

  EdgeIndex edge_between(const FactorId& factor, const VariableId& var) const {
    const std::size_t fi = factor_index(factor);
    const std::size_t vi = variable_index(var);
    for (EdgeIndex e : factor_edges_[fi]) {
      if (edges_[e].variable == vi) return e;
    }
    throw GraphError("no edge between factor '" + factor + "' and variable '" + var + "'");
  }

  /// Concatenation of the current estimates of the factor's variables.
  Vector stacked_estimate(std::size_t factor) const {
    Index dim = 0;
    for (EdgeIndex e : factor_edges_.at(factor)) dim += variables_[edges_[e].variable].dim;
    Vector x(dim);
    Index offset = 0;
    for (EdgeIndex e : factor_edges_[factor]) {
      const auto& v = variables_[edges_[e].variable];
      x.segment(offset, v.dim) = v.x;
      offset += v.dim;
    }
    return x;
  }

  /// Connected components as (variable indices, factor indices).
  struct Component {
    std::vector<std::size_t> variables;
    std::vector<std::size_t> factors;
    std::size_t edge_count = 0;
    bool is_tree() const { return edge_count + 1 == variables.size() + factors.size(); }
  };

  std::vector<Component> components() const {
    std::vector<Component> out;
    std::vector<char> var_seen(variables_.size(), 0);
    std::vector<char> fac_seen(factors_.size(), 0);
    for (std::size_t start = 0; start < variables_.size(); ++start) {
      if (var_seen[start]) continue;
      Component comp;
      std::vector<std::pair<bool, std::size_t>> stack{{true, start}};
      var_seen[start] = 1;
      while (!stack.empty()) {
        auto [is_var, idx] = stack.back();
        stack.pop_back();
        if (is_var) {
          comp.variables.push_back(idx);
          for (EdgeIndex e : variable_edges_[idx]) {
            ++comp.edge_count;
            if (!fac_seen[edges_[e].factor]) {
              fac_seen[edges_[e].factor] = 1;
              stack.push_back({false, edges_[e].factor});
            }
          }
        } else {
          comp.factors.push_back(idx);
          for (EdgeIndex e : factor_edges_[idx]) {
            if (!var_seen[edges_[e].variable]) {
              var_seen[edges_[e].variable] = 1;
              stack.push_back({true, edges_[e].variable});
            }
          }
        }
      }
      out.push_back(std::move(comp));
    }
    return out;
  }

  bool is_tree() const {
    for (const auto& c : components()) {
      if (!c.is_tree()) return false;
    }
    return true;
  }

  MessageStore& messages() noexcept { return messages_; }
  const MessageStore& messages() const noexcept { return messages_; }

  void reset_messages() { messages_.reset(edges_, variables_); }

 private:
  std::vector<VariableNode> variables_;
  std::vector<FactorSpec> factors_;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeIndex>> factor_edges_;
  std::vector<std::vector<EdgeIndex>> variable_edges_;
  std::unordered_map<VariableId, std::size_t> variable_index_;
  std::unordered_map<FactorId, std::size_t> factor_index_;
  MessageStore messages_;
};

}  // namespace gbpfusion::bp
