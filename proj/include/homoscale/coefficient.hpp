#ifndef HOMOSCALE_COEFFICIENT_HPP
#define HOMOSCALE_COEFFICIENT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "homoscale/field.hpp"
#include "homoscale/grid.hpp"
#include "homoscale/tensor.hpp"

namespace homoscale {

/// Matrix-valued coefficient on the product torus given as a finite
/// trigonometric sum, with ellipticity and analyticity certificates.
///
/// A mode holds one frequency multi-index K (one d-vector per block) and the
/// real amplitude pair (C, S) of C cos(2 pi K.y) + S sin(2 pi K.y), so the
/// sampled field is real by construction. Only one of each +-K pair is kept.
class AnalyticCoefficient {
 public:
  struct Mode {
    std::vector<std::vector<int>> freq;  // n entries of d integers
    Mat cos_amp;
    Mat sin_amp;
  };

  AnalyticCoefficient() = default;
  AnalyticCoefficient(int d, int n, double lambda, double C0, double Lambda0)
      : d_(d), n_(n), lambda_(lambda), C0_(C0), Lambda0_(Lambda0) {
    require(d == 1 || d == 2, "AnalyticCoefficient: d must be 1 or 2");
    require(n >= 1, "AnalyticCoefficient: n must be >= 1");
    require(lambda > 0.0, "AnalyticCoefficient: lambda must be positive");
  }

  int d() const { return d_; }
  int n() const { return n_; }
  double lambda() const { return lambda_; }
  double C0() const { return C0_; }
  double Lambda0() const { return Lambda0_; }
  const std::vector<Mode>& modes() const { return modes_; }

  /// Add C cos(2 pi K.y) + S sin(2 pi K.y). The zero frequency must come with
  /// S = 0 (a sine at K = 0 vanishes identically).
  void add_mode(std::vector<std::vector<int>> freq, Mat cos_amp, Mat sin_amp) {
    require(static_cast<int>(freq.size()) == n_, "mode: one frequency vector per block");
    for (const auto& fv : freq)
      require(static_cast<int>(fv.size()) == d_, "mode: frequency vectors must have d entries");
    require(cos_amp.d == d_ && sin_amp.d == d_, "mode: amplitude dimension mismatch");
    if (is_zero_freq(freq))
      require(sin_amp.max_abs() == 0.0, "mode: sine amplitude at zero frequency");
    modes_.push_back({std::move(freq), cos_amp, sin_amp});
  }

  void add_cos(std::vector<std::vector<int>> freq, Mat amp) {
    add_mode(std::move(freq), amp, Mat(d_));
  }
  void add_sin(std::vector<std::vector<int>> freq, Mat amp) {
    add_mode(std::move(freq), Mat(d_), amp);
  }

  /// Constant coefficient helper.
  static AnalyticCoefficient constant(int d, int n, const Mat& value, double lambda) {
    AnalyticCoefficient c(d, n, lambda, value.abs_sum(), 1.0);
    std::vector<std::vector<int>> zero(n, std::vector<int>(d, 0));
    c.add_cos(zero, value);
    return c;
  }

  /// Scalar coefficient a(y) * I from cosine/sine amplitude maps.
  static AnalyticCoefficient scalar(int d, int n, double constant_term,
                                    const std::vector<std::pair<std::vector<std::vector<int>>,
                                                                std::pair<double, double>>>& terms,
                                    double lambda, double C0, double Lambda0) {
    AnalyticCoefficient c(d, n, lambda, C0, Lambda0);
    std::vector<std::vector<int>> zero(n, std::vector<int>(d, 0));
    c.add_cos(zero, Mat::scalar(d, constant_term));
    for (const auto& [freq, cs] : terms)
      c.add_mode(freq, Mat::scalar(d, cs.first), Mat::scalar(d, cs.second));
    return c;
  }

  int max_abs_freq() const {
    int best = 0;
    for (const auto& m : modes_)
      for (const auto& fv : m.freq)
        for (int k : fv) best = std::max(best, std::abs(k));
    return best;
  }

  /// Exact evaluation at a point (one coordinate per axis).
  Mat evaluate(const std::vector<double>& y) const {
    Mat out(d_);
    for (const auto& m : modes_) {
      double phase = 0.0;
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < d_; ++c) phase += m.freq[b][c] * y[b * d_ + c];
      phase *= 2.0 * std::numbers::pi;
      const double cp = std::cos(phase), sp = std::sin(phase);
      for (int i = 0; i < d_ * d_; ++i) out.a[i] += m.cos_amp.a[i] * cp + m.sin_amp.a[i] * sp;
    }
    return out;
  }

  /// Sample onto a grid. Fails if the grid does not resolve the largest
  /// frequency, and verifies pointwise ellipticity on all nodes.
  TorusField sample(const GridSpec& grid, bool check_ellipticity = true) const {
    require(grid.d == d_ && grid.n == n_, "sample: grid dimensions mismatch");
    for (int b = 0; b < n_; ++b) {
      int maxk = 0;
      for (const auto& m : modes_)
        for (int c = 0; c < d_; ++c) maxk = std::max(maxk, std::abs(m.freq[b][c]));
      if (2 * maxk >= grid.res[b])
        throw ResolutionError("sample: grid does not resolve the largest Fourier frequency");
    }
    TorusField out(grid, 2);
    const std::size_t np = grid.npoints();
    std::vector<double> y(grid.axes());
    for (std::size_t p = 0; p < np; ++p) {
      for (int a = 0; a < grid.axes(); ++a) y[a] = grid.coord(p, a);
      Mat v = evaluate(y);
      for (int i = 0; i < d_ * d_; ++i) out.value(i, p) = v.a[i];
      if (check_ellipticity) {
        if (ellipticity_margin(v) < lambda_ - 1e-12)
          throw ValidationError("sample: coefficient violates its ellipticity certificate");
        if (v.op_norm() > 1.0 / lambda_ + 1e-12)
          throw ValidationError("sample: coefficient violates its boundedness certificate");
      }
    }
    return out;
  }

  /// Max over a dense grid of the componentwise-sum norm of the order-ell
  /// derivative tensor. Derivatives of the trigonometric sum are exact.
  double derivative_sup(int ell, int grid_per_axis) const {
    const int axes = d_ * n_;
    // Enumerate multisets of axes with multiplicity (m_0,...,m_{axes-1}),
    // sum m_a = ell; each contributes multinomial(ell; m) ordered tuples.
    std::vector<int> mult(axes, 0);
    double best = 0.0;
    std::vector<double> point(axes);
    std::vector<std::size_t> grid_index;
    std::size_t total_pts = 1;
    for (int a = 0; a < axes; ++a) total_pts *= grid_per_axis;
    std::vector<double> acc(total_pts, 0.0);

    std::function<void(int, int)> recurse = [&](int axis, int remaining) {
      if (axis == axes - 1) {
        mult[axis] = remaining;
        // Multinomial coefficient ell! / prod(m_a!).
        double multinomial = 1.0;
        int placed = 0;
        for (int a = 0; a < axes; ++a)
          for (int r = 1; r <= mult[a]; ++r) multinomial *= static_cast<double>(++placed) / r;
        // Evaluate |d^mult A|(y) over the dense grid and accumulate.
        for (std::size_t p = 0; p < total_pts; ++p) {
          std::size_t rem = p;
          for (int a = axes - 1; a >= 0; --a) {
            point[a] = static_cast<double>(rem % grid_per_axis) / grid_per_axis;
            rem /= grid_per_axis;
          }
          acc[p] += multinomial * derivative_abs_sum(mult, point);
        }
        mult[axis] = 0;
        return;
      }
      for (int m = 0; m <= remaining; ++m) {
        mult[axis] = m;
        recurse(axis + 1, remaining - m);
      }
      mult[axis] = 0;
    };

    if (ell == 0) {
      for (std::size_t p = 0; p < total_pts; ++p) {
        std::size_t rem = p;
        for (int a = axes - 1; a >= 0; --a) {
          point[a] = static_cast<double>(rem % grid_per_axis) / grid_per_axis;
          rem /= grid_per_axis;
        }
        best = std::max(best, evaluate(point).abs_sum());
      }
      return best;
    }
    recurse(0, ell);
    for (double v : acc) best = std::max(best, v);
    return best;
  }

  struct AnalyticityReport {
    std::vector<double> sup_norms;  // |D^l A|_inf for l = 0..ell_check
    double fitted_C0 = 0.0;         // sup at l = 0
    double fitted_Lambda0 = 0.0;    // max over l >= 1 of (sup_l / (C0 l!))^(1/l)
    bool certified = false;         // fitted pair within the declared (C0, Lambda0)
  };

  /// Fit the smallest (C0, Lambda0) consistent with |D^l A| <= C0 Lambda0^l l!
  /// for 0 <= l <= ell_check, measured on a dense grid.
  AnalyticityReport verify_analyticity(int ell_check, int grid_per_axis = 0) const {
    if (grid_per_axis == 0) {
      const int axes = d_ * n_;
      grid_per_axis = axes <= 2 ? 128 : (axes == 3 ? 32 : 16);
    }
    AnalyticityReport rep;
    rep.sup_norms.resize(ell_check + 1);
    for (int l = 0; l <= ell_check; ++l) rep.sup_norms[l] = derivative_sup(l, grid_per_axis);
    rep.fitted_C0 = rep.sup_norms[0];
    double lam = 0.0;
    double factorial = 1.0;
    for (int l = 1; l <= ell_check; ++l) {
      factorial *= l;
      if (rep.fitted_C0 > 0.0 && rep.sup_norms[l] > 0.0)
        lam = std::max(lam, std::pow(rep.sup_norms[l] / (rep.fitted_C0 * factorial), 1.0 / l));
    }
    rep.fitted_Lambda0 = lam;
    rep.certified = rep.fitted_C0 <= C0_ * (1.0 + 1e-9) && lam <= Lambda0_ * (1.0 + 1e-9);
    return rep;
  }

 private:
  static bool is_zero_freq(const std::vector<std::vector<int>>& freq) {
    for (const auto& fv : freq)
      for (int k : fv)
        if (k != 0) return false;
    return true;
  }

  /// Pointwise componentwise-sum norm of the mixed derivative with the given
  /// per-axis multiplicities (one ordered representative; the caller applies
  /// the multinomial count).
  double derivative_abs_sum(const std::vector<int>& mult, const std::vector<double>& y) const {
    Mat out(d_);
    for (const auto& m : modes_) {
      double factor = 1.0;
      int quarter_turns = 0;  // each derivative of cos/sin advances the phase by pi/2
      bool zero = false;
      for (int a = 0; a < d_ * n_; ++a) {
        if (mult[a] == 0) continue;
        const int k = m.freq[a / d_][a % d_];
        if (k == 0) {
          zero = true;
          break;
        }
        factor *= std::pow(2.0 * std::numbers::pi * k, mult[a]);
        quarter_turns += mult[a];
      }
      if (zero) continue;
      double phase = 0.0;
      for (int b = 0; b < n_; ++b)
        for (int c = 0; c < d_; ++c) phase += m.freq[b][c] * y[b * d_ + c];
      phase *= 2.0 * std::numbers::pi;
      phase += 0.5 * std::numbers::pi * quarter_turns;
      const double cp = std::cos(phase), sp = std::sin(phase);
      for (int i = 0; i < d_ * d_; ++i)
        out.a[i] += factor * (m.cos_amp.a[i] * cp + m.sin_amp.a[i] * sp);
    }
    return out.abs_sum();
  }

  int d_ = 1;
  int n_ = 1;
  double lambda_ = 1.0;
  double C0_ = 1.0;
  double Lambda0_ = 1.0;
  std::vector<Mode> modes_;
};

/// Sample a coefficient onto a grid.
inline TorusField build_field(const AnalyticCoefficient& coefficient, const GridSpec& grid) {
  return coefficient.sample(grid);
}

}  // namespace homoscale

#endif  // HOMOSCALE_COEFFICIENT_HPP
