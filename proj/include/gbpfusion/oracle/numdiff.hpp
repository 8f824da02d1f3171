#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"

namespace gbpfusion::oracle {

/// Per-coordinate step rule h_i = relative * max(1, |x_i|).
struct StepRule {
  double relative = 1e-6;
  double step(double xi) const { return relative * std::max(1.0, std::abs(xi)); }
};

/// Central-difference Jacobian of f at x.
///
/// Throws NumericalError naming the perturbed coordinate when f returns a
/// non-finite value.
template <typename Fn>
Matrix finite_difference_jacobian(Fn&& f, const Vector& x, StepRule rule = {}) {
  const Vector f0 = f(x);
  if (!f0.allFinite()) throw NumericalError("non-finite function value at the base point");
  Matrix jac(f0.size(), x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double h = rule.step(x(i));
    xp(i) = x(i) + h;
    const Vector fp = f(xp);
    xp(i) = x(i) - h;
    const Vector fm = f(xp);
    xp(i) = x(i);
    if (!fp.allFinite() || !fm.allFinite()) {
      throw NumericalError("non-finite function value while differentiating coordinate " +
                           std::to_string(i));
    }
    jac.col(i) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

}  // namespace gbpfusion::oracle
