#pragma once

// Brute-force Gaussian conditioning: build the joint information form of a
// set of linear blocks over one stacked vector and read marginals off the
// full covariance. Used to cross-check single messages and whole linear
// graphs without touching any message-passing code.

#include <vector>

#include <Eigen/Dense>

namespace testing_support {

struct LinearBlock {
  std::vector<Eigen::Index> columns;  // positions inside the stacked vector
  Eigen::MatrixXd A;
  Eigen::VectorXd y;
  Eigen::MatrixXd R;
};

struct JointGaussian {
  Eigen::MatrixXd Lambda;
  Eigen::VectorXd eta;

  explicit JointGaussian(Eigen::Index n) : Lambda(Eigen::MatrixXd::Zero(n, n)), eta(Eigen::VectorXd::Zero(n)) {}

  void add(const LinearBlock& b) {
    const Eigen::MatrixXd Rinv = b.R.inverse();
    const Eigen::MatrixXd L = b.A.transpose() * Rinv * b.A;
    const Eigen::VectorXd e = b.A.transpose() * Rinv * b.y;
    for (std::size_t i = 0; i < b.columns.size(); ++i) {
      eta(b.columns[i]) += e(static_cast<Eigen::Index>(i));
      for (std::size_t j = 0; j < b.columns.size(); ++j) {
        Lambda(b.columns[i], b.columns[j]) += L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
    }
  }

  Eigen::VectorXd mean() const { return Lambda.fullPivLu().solve(eta); }
  Eigen::MatrixXd covariance() const { return Lambda.fullPivLu().inverse(); }

  /// Information form of the marginal over `keep` (via the covariance).
  std::pair<Eigen::VectorXd, Eigen::MatrixXd> marginal_information(const std::vector<Eigen::Index>& keep) const {
    const Eigen::MatrixXd S = covariance();
    const Eigen::VectorXd m = mean();
    Eigen::MatrixXd Sk(keep.size(), keep.size());
    Eigen::VectorXd mk(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      mk(static_cast<Eigen::Index>(i)) = m(keep[i]);
      for (std::size_t j = 0; j < keep.size(); ++j) Sk(i, j) = S(keep[i], keep[j]);
    }
    const Eigen::MatrixXd Jk = Sk.inverse();
    return {Jk * mk, Jk};
  }
};

}  // namespace testing_support
