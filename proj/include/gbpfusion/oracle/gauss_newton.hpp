#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"
#include "gbpfusion/oracle/numdiff.hpp"

namespace gbpfusion::oracle {

/// One stacked block of the global problem: y = f(x) + e, e ~ N(0, R), where
/// f sees the full state vector. Constraint blocks use y = 0.
struct ProblemBlock {
  std::string name;
  std::function<Vector(const Vector&)> f;
  std::function<Matrix(const Vector&)> jacobian;  // optional
  Vector y;
  Matrix R;
};

/// The monolithic data-fusion problem: stacked measurements y = f(x) + e and
/// constraints 0 = g(x) + e0 over one state vector.
struct GlobalProblem {
  Index state_dim = 0;
  std::vector<ProblemBlock> measurements;
  std::vector<ProblemBlock> constraints;

  void validate() const {
    if (state_dim < 1) throw ConfigError("global problem has an empty state");
    auto check = [](const ProblemBlock& b) {
      if (!b.f) throw ConfigError("block '" + b.name + "' has no function");
      if (b.R.rows() != b.y.size() || b.R.cols() != b.y.size()) {
        throw ConfigError("block '" + b.name + "' has inconsistent noise dimensions");
      }
      Eigen::LLT<Matrix> llt(b.R);
      if (llt.info() != Eigen::Success) throw ConfigError("block '" + b.name + "' noise is not positive definite");
    };
    for (const auto& b : measurements) check(b);
    for (const auto& b : constraints) check(b);
  }

  template <typename Visit>
  void for_each_block(Visit&& visit) const {
    for (const auto& b : measurements) visit(b);
    for (const auto& b : constraints) visit(b);
  }
};

struct GaussNewtonResult {
  Vector x;
  Matrix covariance;
  int iterations = 0;  // steps taken before the step norm fell below tol
  int sweeps = 0;      // linearizations performed
  bool converged = false;
  double final_step = std::numeric_limits<double>::infinity();
  std::vector<double> step_norms;
};

namespace detail {

struct NormalEquations {
  Matrix H;  // F^T R^{-1} F
  Vector g;  // F^T R^{-1} (y - f(x))
};

inline NormalEquations assemble(const GlobalProblem& problem, const Vector& x) {
  NormalEquations ne{Matrix::Zero(problem.state_dim, problem.state_dim), Vector::Zero(problem.state_dim)};
  problem.for_each_block([&](const ProblemBlock& b) {
    const Vector fx = b.f(x);
    if (fx.size() != b.y.size()) throw ConfigError("block '" + b.name + "' returned the wrong dimension");
    const Matrix F = b.jacobian ? b.jacobian(x) : finite_difference_jacobian(b.f, x);
    if (!fx.allFinite() || !F.allFinite()) throw NumericalError("block '" + b.name + "' is not finite");
    Eigen::LLT<Matrix> llt(b.R);
    const Matrix W = llt.matrixL().solve(F);
    const Vector w = llt.matrixL().solve(Vector(b.y - fx));
    ne.H.noalias() += W.transpose() * W;
    ne.g.noalias() += W.transpose() * w;
  });
  ne.H = symmetrize(ne.H);
  return ne;
}

}  // namespace detail

/// Plain Gauss-Newton on the stacked system:
///   x <- x + (F^T R^{-1} F + jitter I)^{-1} F^T R^{-1} (y - f(x))
/// until ||dx||_inf < tol. No line search. The covariance is
/// (F^T R^{-1} F)^{-1} evaluated at the returned estimate. A singular normal
/// matrix or a non-finite iterate stops the iteration with converged = false.
inline GaussNewtonResult gauss_newton_solve(const GlobalProblem& problem, const Vector& x0, double tol,
                                            int max_iters, double jitter = 1e-12) {
  problem.validate();
  if (x0.size() != problem.state_dim) throw ConfigError("initial point has the wrong dimension");
  if (!x0.allFinite()) throw ConfigError("initial point is not finite");
  GaussNewtonResult out;
  out.x = x0;
  for (int iter = 1; iter <= max_iters; ++iter) {
    const auto ne = detail::assemble(problem, out.x);
    SpdSolver solver(ne.H, jitter);
    if (!solver.ok()) break;
    const Vector dx = solver.solve(ne.g);
    if (!dx.allFinite()) break;
    out.x += dx;
    out.sweeps = iter;
    out.final_step = max_abs(dx);
    out.step_norms.push_back(out.final_step);
    if (out.final_step < tol) {
      out.converged = true;
      out.iterations = iter - 1;
      break;
    }
    out.iterations = iter;
  }
  const auto ne = detail::assemble(problem, out.x);
  SpdSolver solver(ne.H, jitter);
  out.covariance = solver.ok() ? solver.inverse() : Matrix::Constant(problem.state_dim, problem.state_dim,
                                                                       std::numeric_limits<double>::quiet_NaN());
  return out;
}

}  // namespace gbpfusion::oracle
