#pragma once

// Demand and solar regression models supplying the forecast factor.
//
// Demand: periodic cubic spline over hour of day, one copy per day of the
// week, plus clamped cubic splines in daily mean and maximum temperature,
// fitted by ordinary least squares. Solar: intercept + DNI + DHI.
// Both use a single residual variance for every predicted hour.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/QR>

#include "gbpfusion/forecast/spline_basis.hpp"
#include "gbpfusion/scenario/time.hpp"

namespace gbpfusion::forecast {

struct FitOptions {
  int knots = 6;
  std::size_t min_rows = 4 * 168;
};

/// Predictions for a horizon. `extrapolated` marks rows whose covariates lie
/// outside the training range; `clamped` marks solar means raised to zero.
struct Prediction {
  Vector mean;
  Vector variance;
  std::vector<char> extrapolated;
  std::vector<char> clamped;

  Vector lower95() const { return mean - 1.96 * variance.cwiseSqrt(); }
  Vector upper95() const { return mean + 1.96 * variance.cwiseSqrt(); }
};

struct DemandCovariates {
  std::vector<scenario::Timestamp> timestamps;
  Vector t_mean;
  Vector t_max;

  std::size_t size() const { return timestamps.size(); }
  void validate() const {
    if (static_cast<Index>(timestamps.size()) != t_mean.size() ||
        static_cast<Index>(timestamps.size()) != t_max.size()) {
      throw ConfigError("demand covariates are not aligned");
    }
    if (!t_mean.allFinite() || !t_max.allFinite()) throw ConfigError("demand covariates contain missing values");
  }
};

struct SolarCovariates {
  Vector dni;
  Vector dhi;

  std::size_t size() const { return static_cast<std::size_t>(dni.size()); }
  void validate() const {
    if (dni.size() != dhi.size()) throw ConfigError("solar covariates are not aligned");
    if (!dni.allFinite() || !dhi.allFinite()) throw ConfigError("solar covariates contain missing values");
  }
};

namespace detail {

struct LeastSquares {
  Vector coef;
  double rss = 0.0;
  Matrix xtx_inverse;
};

inline LeastSquares solve_least_squares(const Matrix& X, const Vector& y, const char* hint) {
  Eigen::ColPivHouseholderQR<Matrix> qr(X);
  if (qr.rank() < X.cols()) {
    throw FitError(std::string("design matrix is rank deficient (rank ") + std::to_string(qr.rank()) + " of " +
                   std::to_string(X.cols()) + "); " + hint);
  }
  LeastSquares out;
  out.coef = qr.solve(y);
  out.rss = (y - X * out.coef).squaredNorm();
  // (X'X)^-1 = P R^-1 R^-T P'
  const Index p = X.cols();
  const Matrix R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
  const Matrix Rinv = R.template triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  const Matrix perm = qr.colsPermutation();
  out.xtx_inverse = perm * (Rinv * Rinv.transpose()) * perm.transpose();
  return out;
}

inline double sample_variance(const Vector& y) {
  if (y.size() < 2) return 0.0;
  return (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
}

}  // namespace detail

class DemandModel {
 public:
  static constexpr int kDayTypes = 7;

  Vector coefficients;
  double residual_variance = 0.0;
  /// Predictive variance never drops below this (keeps forecasts usable as
  /// Gaussian evidence even for a perfect in-sample fit).
  double variance_floor = 0.0;
  int knots = 6;
  ClampedCubicBasis t_mean_basis;
  ClampedCubicBasis t_max_basis;
  std::size_t rows = 0;

  Index num_columns() const { return kDayTypes * knots + 2 * (t_mean_basis.size() - 1); }

  /// Design row: hour spline in the day-type block, then temperature
  /// splines without their first basis function.
  Matrix design(const DemandCovariates& cov) const {
    cov.validate();
    Matrix X = Matrix::Zero(static_cast<Index>(cov.size()), num_columns());
    const Index tm_cols = t_mean_basis.size() - 1;
    for (std::size_t r = 0; r < cov.size(); ++r) {
      const auto row = static_cast<Index>(r);
      const int day = scenario::day_of_week(cov.timestamps[r]);
      X.block(row, day * knots, 1, knots) =
          periodic_basis(scenario::fractional_hour(cov.timestamps[r]), 24.0, knots).transpose();
      X.block(row, kDayTypes * knots, 1, tm_cols) = t_mean_basis(cov.t_mean(row)).tail(tm_cols).transpose();
      X.block(row, kDayTypes * knots + tm_cols, 1, tm_cols) = t_max_basis(cov.t_max(row)).tail(tm_cols).transpose();
    }
    return X;
  }

  double predictive_variance() const { return std::max(residual_variance, variance_floor); }

  Prediction predict(const DemandCovariates& cov) const {
    const Matrix X = design(cov);
    Prediction p;
    p.mean = X * coefficients;
    p.variance = Vector::Constant(static_cast<Index>(cov.size()), predictive_variance());
    p.extrapolated.resize(cov.size());
    p.clamped.assign(cov.size(), 0);
    for (std::size_t r = 0; r < cov.size(); ++r) {
      const auto row = static_cast<Index>(r);
      p.extrapolated[r] = t_mean_basis.outside(cov.t_mean(row)) || t_max_basis.outside(cov.t_max(row));
    }
    return p;
  }
};

inline DemandModel fit_demand_model(const DemandCovariates& history, const Vector& demand,
                                    const FitOptions& options = {}) {
  history.validate();
  if (static_cast<Index>(history.size()) != demand.size()) throw ConfigError("demand history is not aligned");
  if (!demand.allFinite()) throw ConfigError("demand history contains missing values");
  if (history.size() < options.min_rows) {
    throw FitError("demand model needs at least " + std::to_string(options.min_rows) + " hourly rows, got " +
                   std::to_string(history.size()));
  }
  scenario::require_hourly(history.timestamps);
  DemandModel model;
  model.knots = options.knots;
  model.t_mean_basis = ClampedCubicBasis::at_quantiles(history.t_mean, options.knots);
  model.t_max_basis = ClampedCubicBasis::at_quantiles(history.t_max, options.knots);
  const Matrix X = model.design(history);
  if (X.rows() <= X.cols()) throw FitError("demand model has more columns than rows");
  const auto ls = detail::solve_least_squares(X, demand, "use fewer knots or a longer history");
  model.coefficients = ls.coef;
  model.rows = history.size();
  model.residual_variance = ls.rss / static_cast<double>(X.rows() - X.cols());
  model.variance_floor = std::max(1e-12 * detail::sample_variance(demand), std::numeric_limits<double>::min());
  return model;
}

class SolarModel {
 public:
  Vector coefficients;  // intercept, dni, dhi
  double residual_variance = 0.0;
  double variance_floor = 0.0;
  Matrix coefficient_covariance;
  double dni_lo = 0.0, dni_hi = 0.0, dhi_lo = 0.0, dhi_hi = 0.0;
  std::size_t rows = 0;

  static Matrix design(const SolarCovariates& cov) {
    cov.validate();
    Matrix X(static_cast<Index>(cov.size()), 3);
    X.col(0).setOnes();
    X.col(1) = cov.dni;
    X.col(2) = cov.dhi;
    return X;
  }

  Vector standard_errors() const { return coefficient_covariance.diagonal().cwiseSqrt(); }
  double predictive_variance() const { return std::max(residual_variance, variance_floor); }

  /// Means below zero are raised to zero and flagged in `clamped`.
  Prediction predict(const SolarCovariates& cov) const {
    Prediction p;
    p.mean = design(cov) * coefficients;
    p.variance = Vector::Constant(static_cast<Index>(cov.size()), predictive_variance());
    p.extrapolated.resize(cov.size());
    p.clamped.resize(cov.size());
    for (std::size_t r = 0; r < cov.size(); ++r) {
      const auto row = static_cast<Index>(r);
      p.extrapolated[r] = cov.dni(row) < dni_lo || cov.dni(row) > dni_hi || cov.dhi(row) < dhi_lo ||
                          cov.dhi(row) > dhi_hi;
      p.clamped[r] = p.mean(row) < 0.0;
      if (p.clamped[r]) p.mean(row) = 0.0;
    }
    return p;
  }
};

inline SolarModel fit_solar_model(const SolarCovariates& history, const Vector& solar, const FitOptions& options = {}) {
  history.validate();
  if (static_cast<Index>(history.size()) != solar.size()) throw ConfigError("solar history is not aligned");
  if (!solar.allFinite()) throw ConfigError("solar history contains missing values");
  if (history.size() < options.min_rows) {
    throw FitError("solar model needs at least " + std::to_string(options.min_rows) + " rows, got " +
                   std::to_string(history.size()));
  }
  const Matrix X = SolarModel::design(history);
  const auto ls = detail::solve_least_squares(X, solar, "irradiance covariates are collinear or constant");
  SolarModel model;
  model.coefficients = ls.coef;
  model.rows = history.size();
  model.residual_variance = ls.rss / static_cast<double>(X.rows() - X.cols());
  model.variance_floor = std::max(1e-12 * detail::sample_variance(solar), std::numeric_limits<double>::min());
  model.coefficient_covariance = model.residual_variance * ls.xtx_inverse;
  model.dni_lo = history.dni.minCoeff();
  model.dni_hi = history.dni.maxCoeff();
  model.dhi_lo = history.dhi.minCoeff();
  model.dhi_hi = history.dhi.maxCoeff();
  return model;
}

}  // namespace gbpfusion::forecast
