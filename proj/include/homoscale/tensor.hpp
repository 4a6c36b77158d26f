#ifndef HOMOSCALE_TENSOR_HPP
#define HOMOSCALE_TENSOR_HPP

#include <array>
#include <cmath>
#include <vector>

#include "homoscale/common.hpp"

namespace homoscale {

/// Dense d x d matrix for d in {1,2}; the constant-coefficient workhorse.
struct Mat {
  int d = 1;
  std::array<double, 4> a{0.0, 0.0, 0.0, 0.0};  // row-major, d*d entries used

  Mat() = default;
  explicit Mat(int d_) : d(d_) {}
  static Mat identity(int d_) {
    Mat m(d_);
    for (int i = 0; i < d_; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat scalar(int d_, double v) {
    Mat m(d_);
    for (int i = 0; i < d_; ++i) m(i, i) = v;
    return m;
  }

  double& operator()(int i, int j) { return a[i * d + j]; }
  double operator()(int i, int j) const { return a[i * d + j]; }

  Mat operator+(const Mat& o) const {
    Mat r(d);
    for (int i = 0; i < d * d; ++i) r.a[i] = a[i] + o.a[i];
    return r;
  }
  Mat operator-(const Mat& o) const {
    Mat r(d);
    for (int i = 0; i < d * d; ++i) r.a[i] = a[i] - o.a[i];
    return r;
  }
  Mat operator*(double s) const {
    Mat r(d);
    for (int i = 0; i < d * d; ++i) r.a[i] = a[i] * s;
    return r;
  }

  std::array<double, 2> apply(const std::array<double, 2>& v) const {
    std::array<double, 2> out{0.0, 0.0};
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  /// Componentwise-sum tensor norm.
  double abs_sum() const {
    double s = 0.0;
    for (int i = 0; i < d * d; ++i) s += std::abs(a[i]);
    return s;
  }

  double max_abs() const {
    double s = 0.0;
    for (int i = 0; i < d * d; ++i) s = std::max(s, std::abs(a[i]));
    return s;
  }

  /// Smallest eigenvalue of the symmetric part (closed form for d <= 2).
  double min_sym_eig() const {
    if (d == 1) return a[0];
    double s00 = (*this)(0, 0), s11 = (*this)(1, 1);
    double s01 = 0.5 * ((*this)(0, 1) + (*this)(1, 0));
    double mean = 0.5 * (s00 + s11);
    double rad = std::sqrt(0.25 * (s00 - s11) * (s00 - s11) + s01 * s01);
    return mean - rad;
  }

  /// Largest singular value (operator norm), closed form for d <= 2.
  double op_norm() const {
    if (d == 1) return std::abs(a[0]);
    // Largest eigenvalue of A^T A.
    double m00 = a[0] * a[0] + a[2] * a[2];
    double m01 = a[0] * a[1] + a[2] * a[3];
    double m11 = a[1] * a[1] + a[3] * a[3];
    double mean = 0.5 * (m00 + m11);
    double rad = std::sqrt(0.25 * (m00 - m11) * (m00 - m11) + m01 * m01);
    return std::sqrt(std::max(0.0, mean + rad));
  }
};

inline Mat operator*(double s, const Mat& m) { return m * s; }

/// Ellipticity margin min_{|xi|=1} xi . A xi (equals min_sym_eig).
inline double ellipticity_margin(const Mat& m) { return m.min_sym_eig(); }

}  // namespace homoscale

#endif  // HOMOSCALE_TENSOR_HPP
