#ifndef HOMOSCALE_QUADRATURE_HPP
#define HOMOSCALE_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <functional>

#include "homoscale/common.hpp"

namespace homoscale {

/// Composite Gauss-Legendre quadrature. 8 nodes per panel is exact through
/// degree 15, so panel counts are driven by oscillation, not by order.
namespace quad {

inline constexpr std::array<double, 8> kNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
inline constexpr std::array<double, 8> kWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

/// Integral over [a, b] with 8-point Gauss on `panels` uniform panels.
template <typename F>
double integrate(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = a + (p + 0.5) * h;
    double acc = 0.0;
    for (int q = 0; q < 8; ++q) acc += kWeights[q] * f(mid + 0.5 * h * kNodes[q]);
    total += 0.5 * h * acc;
  }
  return total;
}

/// Integral over the unit square with a tensor Gauss rule.
template <typename F>
double integrate2d(F&& f, int panels_per_axis) {
  auto outer = [&](double x) {
    return integrate([&](double y) { return f(x, y); }, 0.0, 1.0, panels_per_axis);
  };
  return integrate(outer, 0.0, 1.0, panels_per_axis);
}

/// L2 norm over [a, b].
template <typename F>
double l2_norm(F&& f, double a, double b, int panels) {
  double v = integrate([&](double x) { double y = f(x); return y * y; }, a, b, panels);
  return std::sqrt(std::max(0.0, v));
}

}  // namespace quad

}  // namespace homoscale

#endif  // HOMOSCALE_QUADRATURE_HPP
