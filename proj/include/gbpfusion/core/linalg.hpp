#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

namespace gbpfusion {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Max-abs entry of m - m^T.
inline double asymmetry(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

inline double max_abs(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

/// Smallest eigenvalue of a symmetric matrix (+inf for an empty matrix).
inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

/// Smallest eigenvalue of D^{-1/2} m D^{-1/2}, D = diag(m). All-zero rows are
/// dropped; a negative diagonal entry, or a zero diagonal with nonzero
/// off-diagonal entries, is reported as -inf.
inline double scaled_min_eigenvalue(const Matrix& m) {
  const Index n = m.rows();
  Vector scale = Vector::Zero(n);
  Index kept = 0;
  for (Index i = 0; i < n; ++i) {
    const double d = m(i, i);
    if (d < 0.0) return -std::numeric_limits<double>::infinity();
    if (d > 0.0) {
      scale(i) = 1.0 / std::sqrt(d);
      ++kept;
    } else if (m.row(i).cwiseAbs().maxCoeff() > 0.0) {
      return -std::numeric_limits<double>::infinity();  // zero pivot with coupling: indefinite
    }
  }
  if (kept == 0) return std::numeric_limits<double>::infinity();
  Matrix reduced(kept, kept);
  Index r = 0;
  for (Index i = 0; i < n; ++i) {
    if (scale(i) == 0.0) continue;
    Index c = 0;
    for (Index j = 0; j < n; ++j) {
      if (scale(j) == 0.0) continue;
      reduced(r, c++) = m(i, j) * scale(i) * scale(j);
    }
    ++r;
  }
  return min_eigenvalue(reduced);
}

/// Ratio of largest to smallest eigenvalue of a symmetric PSD matrix; +inf when
/// the smallest eigenvalue is not positive.
inline double condition_number(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

/// Symmetric positive-definite solve of (A + jitter I) x = b through LDLT.
///
/// The factorization is declared singular when any pivot is no larger than
/// what the jitter alone would contribute plus a relative floor tied to the
/// largest diagonal entry of A. A zero matrix is therefore singular for any
/// jitter, while an ill-conditioned but positive-definite matrix is accepted.
class SpdSolver {
 public:
  static constexpr double kRelativePivotFloor = 1e-14;

  SpdSolver(const Matrix& a, double jitter) {
    const Index n = a.rows();
    double scale = 0.0;
    for (Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    Matrix shifted = a;
    shifted.diagonal().array() += jitter;
    ldlt_.compute(shifted);
    ok_ = ldlt_.info() == Eigen::Success;
    if (ok_ && n > 0) {
      const double floor = 2.0 * jitter + kRelativePivotFloor * scale;
      const auto& d = ldlt_.vectorD();
      ok_ = d.allFinite() && d.minCoeff() > floor;
    }
  }

  bool ok() const noexcept { return ok_; }

  template <typename Rhs>
  auto solve(const Eigen::MatrixBase<Rhs>& b) const {
    return ldlt_.solve(b).eval();
  }

  Matrix inverse() const {
    const Index n = ldlt_.rows();
    return symmetrize(ldlt_.solve(Matrix::Identity(n, n)));
  }

 private:
  Eigen::LDLT<Matrix> ldlt_;
  bool ok_ = false;
};

/// Square-root factor S with S^T S = A for a symmetric PSD matrix.
///
/// Eigenvalues are floored at `floor`; directions left at zero get a zero row
/// in `inverse_t` (pseudo-inverse).
struct SqrtFactor {
  Matrix root;       // S
  Matrix inverse_t;  // S^{-T}
};

inline SqrtFactor psd_sqrt(const Matrix& a, double floor) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a));
  const Vector lambda = es.eigenvalues().cwiseMax(std::max(floor, 0.0));
  const Matrix& v = es.eigenvectors();
  Vector root = lambda.cwiseSqrt();
  Vector inv_root(root.size());
  for (Index i = 0; i < root.size(); ++i) inv_root(i) = root(i) > 0.0 ? 1.0 / root(i) : 0.0;
  SqrtFactor out;
  out.root = root.asDiagonal() * v.transpose();
  out.inverse_t = inv_root.asDiagonal() * v.transpose();
  return out;
}

}  // namespace gbpfusion
