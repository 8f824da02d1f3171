#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gbpfusion/bp/factor_graph.hpp"
#include "gbpfusion/bp/inference.hpp"
#include "gbpfusion/oracle/gauss_newton.hpp"

namespace gbpfusion::oracle {

/// Offsets of each graph variable inside the stacked state (graph order).
inline std::vector<Index> state_offsets(const bp::FactorGraph& graph) {
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& v : graph.variables()) {
    offsets.push_back(offset);
    offset += v.dim;
  }
  offsets.push_back(offset);
  return offsets;
}

inline Vector stacked_initial_state(const bp::FactorGraph& graph) {
  const auto offsets = state_offsets(graph);
  Vector x(offsets.back());
  for (std::size_t i = 0; i < graph.num_variables(); ++i) {
    x.segment(offsets[i], graph.variable(i).dim) = graph.variable(i).x;
  }
  return x;
}

/// Stacks every factor of `graph` into one measurement block over the
/// concatenated state. Only the factors' measurement models are reused.
inline GlobalProblem problem_from_graph(const bp::FactorGraph& graph) {
  GlobalProblem problem;
  const auto offsets = state_offsets(graph);
  problem.state_dim = offsets.back();
  for (std::size_t f = 0; f < graph.num_factors(); ++f) {
    const bp::FactorSpec& spec = graph.factor(f);
    std::vector<Index> columns;
    for (const auto& vid : spec.vars()) {
      const std::size_t vi = graph.variable_index(vid);
      for (Index k = 0; k < graph.variable(vi).dim; ++k) columns.push_back(offsets[vi] + k);
    }
    auto shared = std::make_shared<const bp::FactorSpec>(spec);
    const Index n = problem.state_dim;
    ProblemBlock block;
    block.name = spec.id();
    block.y = spec.y();
    block.R = spec.noise();
    block.f = [shared, columns](const Vector& x) { return shared->evaluate(x(columns)); };
    block.jacobian = [shared, columns, n](const Vector& x) {
      const Matrix local = shared->jacobian(x(columns));
      Matrix full = Matrix::Zero(local.rows(), n);
      for (std::size_t c = 0; c < columns.size(); ++c) full.col(columns[c]) = local.col(static_cast<Index>(c));
      return full;
    };
    problem.measurements.push_back(std::move(block));
  }
  return problem;
}

struct ComparisonReport {
  double max_abs_mean_diff = std::numeric_limits<double>::infinity();
  int bp_iterations = 0;
  int gn_iterations = 0;
  bool bp_converged = false;
  bool gn_converged = false;
  std::string note;

  bool both_converged() const { return bp_converged && gn_converged; }
};

/// Runs belief propagation on a copy of `graph` and Gauss-Newton on
/// `problem` from the same starting point and reports the largest mean
/// discrepancy. `problem` must use the graph's variable order for its state.
inline ComparisonReport compare_bp_vs_gn(const bp::FactorGraph& graph, const GlobalProblem& problem,
                                         const bp::InferenceConfig& config) {
  ComparisonReport report;
  const Vector x0 = stacked_initial_state(graph);
  if (problem.state_dim != x0.size()) throw ConfigError("problem and graph disagree on the state dimension");

  bp::FactorGraph work = graph;
  try {
    const bp::InferenceResult bp_result = bp::run_inference(work, config);
    report.bp_iterations = bp_result.diagnostics.iterations;
    report.bp_converged = bp_result.diagnostics.converged;
  } catch (const Error& e) {
    report.note += std::string("belief propagation failed: ") + e.what() + "; ";
    return report;
  }

  const GaussNewtonResult gn = gauss_newton_solve(problem, x0, config.tol, config.max_outer_iters, config.jitter);
  report.gn_iterations = gn.iterations;
  report.gn_converged = gn.converged;

  const auto offsets = state_offsets(graph);
  double diff = 0.0;
  for (std::size_t i = 0; i < work.num_variables(); ++i) {
    const auto& node = work.variable(i);
    diff = std::max(diff, max_abs(Vector(node.x - gn.x.segment(offsets[i], node.dim))));
  }
  report.max_abs_mean_diff = diff;
  if (!report.bp_converged) report.note += "belief propagation did not converge; ";
  if (!report.gn_converged) report.note += "Gauss-Newton did not converge; ";
  return report;
}

}  // namespace gbpfusion::oracle
