// Test-side oracles, independent of the solver paths they certify:
// quadrature identities, closed forms, finite differences, direct Fourier
// summation and supercell references.
#ifndef HOMOSCALE_TESTS_ORACLES_HPP
#define HOMOSCALE_TESTS_ORACLES_HPP

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "homoscale/quadrature.hpp"

namespace oracles {

inline constexpr double kPi = std::numbers::pi;

/// Harmonic mean of a positive 1-periodic function by quadrature.
inline double harmonic_mean_1d(const std::function<double(double)>& a, int panels = 512) {
  double inv = homoscale::quad::integrate([&](double y) { return 1.0 / a(y); }, 0.0, 1.0, panels);
  return 1.0 / inv;
}

/// Full harmonic mean over the unit square.
inline double harmonic_mean_2d(const std::function<double(double, double)>& a, int panels = 256) {
  double inv =
      homoscale::quad::integrate2d([&](double y1, double y2) { return 1.0 / a(y1, y2); }, panels);
  return 1.0 / inv;
}

/// Central finite difference of a scalar callable.
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

/// Least-squares slope of y against x.
inline double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// L2(0,1) distance of f from the ray {k q : k >= 0}.
inline double ray_distance(const std::function<double(double)>& f,
                           const std::function<double(double)>& q, int panels = 2048) {
  double fq = homoscale::quad::integrate([&](double x) { return f(x) * q(x); }, 0.0, 1.0, panels);
  double qq = homoscale::quad::integrate([&](double x) { return q(x) * q(x); }, 0.0, 1.0, panels);
  double ff = homoscale::quad::integrate([&](double x) { return f(x) * f(x); }, 0.0, 1.0, panels);
  double k = std::max(0.0, fq / qq);
  return std::sqrt(std::max(0.0, ff - 2.0 * k * fq + k * k * qq));
}

}  // namespace oracles

#endif  // HOMOSCALE_TESTS_ORACLES_HPP
