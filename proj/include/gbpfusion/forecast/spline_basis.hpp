#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gbpfusion/core/errors.hpp"
#include "gbpfusion/core/linalg.hpp"

namespace gbpfusion::forecast {

/// Uniform cubic B-spline on [0, 4), zero elsewhere.
inline double cardinal_cubic(double u) {
  if (u < 0.0 || u >= 4.0) return 0.0;
  if (u < 1.0) return u * u * u / 6.0;
  if (u < 2.0) {
    const double v = u - 1.0;
    return (-3.0 * v * v * v + 3.0 * v * v + 3.0 * v + 1.0) / 6.0;
  }
  if (u < 3.0) {
    const double v = u - 2.0;
    return (3.0 * v * v * v - 6.0 * v * v + 4.0) / 6.0;
  }
  const double v = 4.0 - u;
  return v * v * v / 6.0;
}

/// Periodic cubic B-spline basis with `knots` equally spaced knots over one
/// period. Returns `knots` values that sum to one.
inline Vector periodic_basis(double x, double period, int knots) {
  if (knots < 4) throw ConfigError("periodic spline needs at least 4 knots");
  const double h = period / knots;
  double u = std::fmod(x, period);
  if (u < 0.0) u += period;
  u /= h;
  Vector b = Vector::Zero(knots);
  for (int j = 0; j < knots; ++j) {
    double t = u - j;
    if (t < 0.0) t += knots;
    b(j) = cardinal_cubic(t);
  }
  return b;
}

/// Clamped cubic B-spline through `knots` increasing knots (ends included);
/// gives knots + 2 basis functions. Inputs outside [first, last knot] are
/// clamped to it.
class ClampedCubicBasis {
 public:
  ClampedCubicBasis() = default;
  ClampedCubicBasis(double lo, double hi, int knots) : lo_(lo), hi_(hi) {
    if (knots < 2) throw ConfigError("clamped spline needs at least 2 knots");
    if (!(hi > lo)) throw FitError("covariate has no spread; cannot place spline knots");
    std::vector<double> k;
    for (int i = 0; i < knots; ++i) k.push_back(lo + (hi - lo) * i / (knots - 1));
    set_knots(k);
  }

  /// Knots at evenly spaced quantiles of the distinct values of `x`, so
  /// every knot interval holds data.
  static ClampedCubicBasis at_quantiles(const Vector& x, int knots) {
    if (knots < 2) throw ConfigError("clamped spline needs at least 2 knots");
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    if (v.size() < static_cast<std::size_t>(knots)) {
      throw FitError("covariate has " + std::to_string(v.size()) + " distinct values for " + std::to_string(knots) +
                     " spline knots; use fewer knots or a longer history");
    }
    std::vector<double> k;
    for (int i = 0; i < knots; ++i) {
      const double pos = static_cast<double>(i) * static_cast<double>(v.size() - 1) / (knots - 1);
      const auto j = std::min(static_cast<std::size_t>(pos), v.size() - 2);
      const double f = pos - static_cast<double>(j);
      k.push_back(v[j] + f * (v[j + 1] - v[j]));
    }
    ClampedCubicBasis b;
    b.set_knots(k);
    return b;
  }

  int size() const { return static_cast<int>(t_.size()) - 4; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool outside(double x) const { return x < lo_ || x > hi_; }

  Vector operator()(double x) const {
    x = std::clamp(x, lo_, hi_);
    const int n = size();
    // Cox-de Boor, degree 0 up to 3; the last interval is closed on the right.
    const int m = static_cast<int>(t_.size()) - 1;
    std::vector<double> N(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
      const bool last = x == hi_ && t_[static_cast<std::size_t>(i + 1)] == hi_ && t_[static_cast<std::size_t>(i)] < hi_;
      if ((t_[static_cast<std::size_t>(i)] <= x && x < t_[static_cast<std::size_t>(i + 1)]) || last) {
        N[static_cast<std::size_t>(i)] = 1.0;
      }
    }
    for (int p = 1; p <= 3; ++p) {
      for (int i = 0; i + p < m; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        double v = 0.0;
        const double d1 = t_[ui + static_cast<std::size_t>(p)] - t_[ui];
        const double d2 = t_[ui + static_cast<std::size_t>(p) + 1] - t_[ui + 1];
        if (d1 > 0.0) v += (x - t_[ui]) / d1 * N[ui];
        if (d2 > 0.0) v += (t_[ui + static_cast<std::size_t>(p) + 1] - x) / d2 * N[ui + 1];
        N[ui] = v;
      }
    }
    Vector b(n);
    for (int i = 0; i < n; ++i) b(i) = N[static_cast<std::size_t>(i)];
    return b;
  }

 private:
  void set_knots(const std::vector<double>& k) {
    lo_ = k.front();
    hi_ = k.back();
    t_.assign(3, lo_);
    t_.insert(t_.end(), k.begin(), k.end());
    t_.insert(t_.end(), 3, hi_);
  }

  double lo_ = 0.0;
  double hi_ = 1.0;
  std::vector<double> t_;
};

}  // namespace gbpfusion::forecast
