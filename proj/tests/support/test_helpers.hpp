#pragma once

#include <random>
#include <string>
#include <vector>

#include "gbpfusion/bp/factor_graph.hpp"

namespace testing_support {

using gbpfusion::Index;
using gbpfusion::Matrix;
using gbpfusion::Vector;

inline std::string source_path(const std::string& rel) { return std::string(GBPFUSION_SOURCE_DIR) + "/" + rel; }

/// y = A x + e over the concatenated variables.
inline gbpfusion::bp::FactorSpec linear_factor(const std::string& id, std::vector<std::string> vars, const Matrix& A,
                                               const Vector& y, const Matrix& R) {
  return gbpfusion::bp::FactorSpec(
      id, std::move(vars), [A](const Vector& x) { return Vector(A * x); }, y, R,
      [A](const Vector&) { return A; });
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index n) { return random_matrix(rng, n, 1).col(0); }

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(std::mt19937_64& rng, Index n, double lo = 0.5, double hi = 2.0) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
  const Matrix Q = qr.householderQ();
  std::uniform_real_distribution<double> u(lo, hi);
  Vector d(n);
  for (Index i = 0; i < n; ++i) d(i) = u(rng);
  return Q * d.asDiagonal() * Q.transpose();
}

}  // namespace testing_support
