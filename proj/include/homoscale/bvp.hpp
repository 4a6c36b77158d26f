#ifndef HOMOSCALE_BVP_HPP
#define HOMOSCALE_BVP_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "homoscale/common.hpp"
#include "homoscale/corrector.hpp"
#include "homoscale/quadrature.hpp"
#include "homoscale/tensor.hpp"

namespace homoscale {

// ---------------------------------------------------------------------------
// 1-D Dirichlet solves on (0,1) by exact quadrature of the first integral.
// ---------------------------------------------------------------------------

/// Solution of -(a u')' = f (f constant) with u(0) = g0, u(1) = g1, computed
/// from a u' = -(f x + C) with composite Gauss quadrature resolving the
/// finest oscillation. Panels are uniform; evaluation anywhere uses the
/// cumulative panel integrals plus a partial-panel rule.
class FineSolution1D {
 public:
  FineSolution1D(std::function<double(double)> a, double f, double g0, double g1,
                 double finest_scale, int panels_override = 0)
      : a_(std::move(a)), f_(f), g0_(g0) {
    require(finest_scale > 0.0, "FineSolution1D: finest scale must be positive");
    int panels = panels_override > 0
                     ? panels_override
                     : static_cast<int>(std::ceil(2.5 / finest_scale));
    panels = std::max(panels, 64);
    // 8 Gauss nodes per panel: node spacing <= eps/20 requires panel length
    // <= eps/2.5.
    if (1.0 / panels > finest_scale / 2.5)
      throw ResolutionError("FineSolution1D: quadrature does not resolve the finest scale");
    x_.resize(panels + 1);
    I1_.assign(panels + 1, 0.0);
    I2_.assign(panels + 1, 0.0);
    const double h = 1.0 / panels;
    for (int i = 0; i <= panels; ++i) x_[i] = i * h;
    for (int i = 0; i < panels; ++i) {
      double s1 = 0.0, s2 = 0.0;
      const double mid = (i + 0.5) * h;
      for (int q = 0; q < 8; ++q) {
        double t = mid + 0.5 * h * quad::kNodes[q];
        double w = 0.5 * h * quad::kWeights[q];
        double inv = 1.0 / a_(t);
        s1 += w * inv;
        s2 += w * t * inv;
      }
      I1_[i + 1] = I1_[i] + s1;
      I2_[i + 1] = I2_[i] + s2;
    }
    // u(1) = g1 fixes the flux constant: u(1) = g0 - f I2(1) - C I1(1).
    C_ = (g0_ - g1 - f_ * I2_.back()) / I1_.back();
  }

  double operator()(double x) const {
    x = std::clamp(x, 0.0, 1.0);
    const int panels = static_cast<int>(x_.size()) - 1;
    int i = std::min(static_cast<int>(x * panels), panels - 1);
    double s1 = 0.0, s2 = 0.0;
    if (x > x_[i]) {
      const double h = x - x_[i];
      const double mid = x_[i] + 0.5 * h;
      for (int q = 0; q < 8; ++q) {
        double t = mid + 0.5 * h * quad::kNodes[q];
        double w = 0.5 * h * quad::kWeights[q];
        double inv = 1.0 / a_(t);
        s1 += w * inv;
        s2 += w * t * inv;
      }
    }
    return g0_ - f_ * (I2_[i] + s2) - C_ * (I1_[i] + s1);
  }

  /// u'(x) = -(f x + C) / a(x), exact given the flux constant.
  double deriv(double x) const { return -(f_ * x + C_) / a_(x); }

  double flux_constant() const { return C_; }
  int panels() const { return static_cast<int>(x_.size()) - 1; }

 private:
  std::function<double(double)> a_;
  double f_;
  double g0_;
  double C_ = 0.0;
  std::vector<double> x_, I1_, I2_;
};

/// Spec-level wrapper.
inline FineSolution1D solve_fine_1d(std::function<double(double)> a_eps, double f, double g0,
                                    double g1, double finest_scale, int panels_override = 0) {
  return FineSolution1D(std::move(a_eps), f, g0, g1, finest_scale, panels_override);
}

/// Constant-coefficient solution of -(abar u')' = f, u(0) = g0, u(1) = g1.
inline std::function<double(double)> solve_effective_1d(double abar, double f, double g0,
                                                        double g1) {
  require(abar > 0.0, "solve_effective_1d: coefficient must be positive");
  return [=](double x) { return g0 + (g1 - g0) * x + 0.5 * f * x * (1.0 - x) / abar; };
}

// ---------------------------------------------------------------------------
// 2-D Dirichlet solves on the unit square by second-order finite differences.
// ---------------------------------------------------------------------------

/// Nodal solution on an (N+1) x (N+1) grid, row-major with x fastest.
struct Solution2D {
  int N = 0;
  std::vector<double> u;
  double h() const { return 1.0 / N; }
  double at(int i, int j) const { return u[j * (N + 1) + i]; }  // x index i, y index j
};

namespace bvp_detail {

/// Conservative 5-point part plus central cross terms for the full matrix.
/// CG on the interior unknowns with Jacobi preconditioning.
inline Solution2D solve_fd2d(const std::function<Mat(double, double)>& A,
                             const std::function<double(double, double)>& f,
                             const std::function<double(double, double)>& g, int N, double tol,
                             int max_iter) {
  require(N >= 4, "solve_fd2d: mesh too coarse");
  const double h = 1.0 / N;
  const int M = N - 1;  // interior per direction
  Solution2D sol;
  sol.N = N;
  sol.u.assign((N + 1) * (N + 1), 0.0);
  for (int j = 0; j <= N; ++j)
    for (int i = 0; i <= N; ++i)
      if (i == 0 || j == 0 || i == N || j == N) sol.u[j * (N + 1) + i] = g(i * h, j * h);

  auto a11m = [&](double x, double y) { return A(x, y)(0, 0); };
  auto a22m = [&](double x, double y) { return A(x, y)(1, 1); };
  auto a12m = [&](double x, double y) { return A(x, y)(0, 1); };
  auto a21m = [&](double x, double y) { return A(x, y)(1, 0); };

  // Precompute staggered diagonal coefficients and nodal cross coefficients.
  std::vector<double> ax((N + 1) * N), ay(N * (N + 1)), c12((N + 1) * (N + 1)),
      c21((N + 1) * (N + 1));
  for (int j = 0; j <= N; ++j)
    for (int i = 0; i < N; ++i) ax[j * N + i] = a11m((i + 0.5) * h, j * h);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i <= N; ++i) ay[j * (N + 1) + i] = a22m(i * h, (j + 0.5) * h);
  for (int j = 0; j <= N; ++j)
    for (int i = 0; i <= N; ++i) {
      c12[j * (N + 1) + i] = a12m(i * h, j * h);
      c21[j * (N + 1) + i] = a21m(i * h, j * h);
    }

  // Full-grid operator application on a scratch copy (boundary values fixed).
  auto apply_full = [&](const std::vector<double>& w, std::vector<double>& out) {
    for (int j = 1; j < N; ++j)
      for (int i = 1; i < N; ++i) {
        const int id = j * (N + 1) + i;
        double val = 0.0;
        val -= ax[j * N + i] * (w[id + 1] - w[id]) - ax[j * N + i - 1] * (w[id] - w[id - 1]);
        val -= ay[j * (N + 1) + i] * (w[id + N + 1] - w[id]) -
               ay[(j - 1) * (N + 1) + i] * (w[id] - w[id - N - 1]);
        // Cross terms: -d/dx(a12 du/dy) - d/dy(a21 du/dx), central.
        double dxy = c12[id + 1] * (w[id + 1 + N + 1] - w[id + 1 - N - 1]) -
                     c12[id - 1] * (w[id - 1 + N + 1] - w[id - 1 - N - 1]);
        double dyx = c21[id + N + 1] * (w[id + N + 2] - w[id + N]) -
                     c21[id - N - 1] * (w[id - N] - w[id - N - 2]);
        val -= 0.25 * (dxy + dyx);
        out[id] = val / (h * h);
      }
  };

  // Right-hand side with boundary lifting.
  std::vector<double> rhs((N + 1) * (N + 1), 0.0);
  {
    std::vector<double> Lg((N + 1) * (N + 1), 0.0);
    apply_full(sol.u, Lg);
    for (int j = 1; j < N; ++j)
      for (int i = 1; i < N; ++i)
        rhs[j * (N + 1) + i] = f(i * h, j * h) - Lg[j * (N + 1) + i];
  }

  // CG on interior unknowns.
  auto idx = [&](int i, int j) { return (j - 1) * M + (i - 1); };
  std::vector<double> x(M * M, 0.0), r(M * M), z(M * M), p(M * M), Ap(M * M);
  std::vector<double> diag(M * M, 1.0);
  std::vector<double> wfull((N + 1) * (N + 1), 0.0), Lw((N + 1) * (N + 1), 0.0);
  auto apply_int = [&](const std::vector<double>& v, std::vector<double>& out) {
    std::fill(wfull.begin(), wfull.end(), 0.0);
    for (int j = 1; j < N; ++j)
      for (int i = 1; i < N; ++i) wfull[j * (N + 1) + i] = v[idx(i, j)];
    apply_full(wfull, Lw);
    for (int j = 1; j < N; ++j)
      for (int i = 1; i < N; ++i) out[idx(i, j)] = Lw[j * (N + 1) + i];
  };
  for (int j = 1; j < N; ++j)
    for (int i = 1; i < N; ++i)
      diag[idx(i, j)] = (ax[j * N + i] + ax[j * N + i - 1] + ay[j * (N + 1) + i] +
                         ay[(j - 1) * (N + 1) + i]) /
                        (h * h);

  std::vector<double> b(M * M);
  for (int j = 1; j < N; ++j)
    for (int i = 1; i < N; ++i) b[idx(i, j)] = rhs[j * (N + 1) + i];
  double bnorm = 0.0;
  for (double v : b) bnorm += v * v;
  bnorm = std::sqrt(bnorm);
  if (bnorm == 0.0) return sol;

  r = b;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) rz += r[i] * z[i];
  int it = 0;
  for (; it < max_iter; ++it) {
    apply_int(p, Ap);
    double pAp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) pAp += p[i] * Ap[i];
    if (pAp <= 0.0) break;
    double alpha = rz / pAp;
    double rn = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
      rn += r[i] * r[i];
    }
    if (std::sqrt(rn) <= tol * bnorm) break;
    double rz_new = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      z[i] = r[i] / diag[i];
      rz_new += r[i] * z[i];
    }
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = z[i] + beta * p[i];
  }
  if (it >= max_iter) throw SolverError("solve_fd2d: CG did not converge");
  for (int j = 1; j < N; ++j)
    for (int i = 1; i < N; ++i) sol.u[j * (N + 1) + i] = x[idx(i, j)];
  return sol;
}

}  // namespace bvp_detail

/// Fine 2-D solve with a pointwise coefficient (matrix-valued callable).
/// The mesh must resolve the finest oscillation: h <= finest_scale / 8.
inline Solution2D solve_fine_2d(const std::function<Mat(double, double)>& A_eps,
                                const std::function<double(double, double)>& f,
                                const std::function<double(double, double)>& g, int N,
                                double finest_scale, double tol = 1e-10, int max_iter = 20000) {
  if (finest_scale > 0.0 && 1.0 / N > finest_scale / 8.0)
    throw ResolutionError("solve_fine_2d: mesh does not resolve the finest scale");
  return bvp_detail::solve_fd2d(A_eps, f, g, N, tol, max_iter);
}

/// Effective 2-D solve with a constant matrix.
inline Solution2D solve_effective_2d(const Mat& Abar,
                                     const std::function<double(double, double)>& f,
                                     const std::function<double(double, double)>& g, int N,
                                     double tol = 1e-10, int max_iter = 20000) {
  require(ellipticity_margin(Abar) > 0.0, "solve_effective_2d: coefficient not elliptic");
  return bvp_detail::solve_fd2d([&](double, double) { return Abar; }, f, g, N, tol, max_iter);
}

// ---------------------------------------------------------------------------
// First-order expansion error on (0,1).
// ---------------------------------------------------------------------------

/// C^2 smoothstep cutoff of the boundary distance: 0 on dist <= 3 eps1,
/// 1 on dist >= 4 eps1, with |grad| <= C / eps1.
struct BoundaryCutoff1D {
  double eps1;
  double operator()(double x) const {
    double dist = std::min(x, 1.0 - x);
    double t = (dist - 3.0 * eps1) / eps1;
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
  }
  double deriv(double x) const {
    double dist = std::min(x, 1.0 - x);
    double t = (dist - 3.0 * eps1) / eps1;
    if (t <= 0.0 || t >= 1.0) return 0.0;
    double ds = 30.0 * t * t * (1.0 - t) * (1.0 - t) / eps1;
    return (x <= 0.5 ? 1.0 : -1.0) * ds;
  }
};

struct ExpansionError {
  double l2_error = 0.0;    // || u_eps - u0 ||_L2
  double w_eps_l2 = 0.0;    // || w_eps ||_L2
  double w_eps_h1 = 0.0;    // || w_eps ||_H1 (L2 + first derivative)
  double cutoff_width = 0.0;
};

/// Collapsed diagonal trace of a field with rational scale ratios
/// delta_i = 1 / q_i: a 1-periodic trigonometric polynomial in t with
/// frequencies sum_i q_i K_i, evaluated in O(#modes) per point.
class CollapsedTrace {
 public:
  CollapsedTrace() = default;
  CollapsedTrace(const TorusField& f, std::size_t comp, const std::vector<double>& deltas,
                 double drop_tol = 1e-14) {
    const GridSpec& g = f.grid();
    require(g.d == 1, "CollapsedTrace: 1-D fields only");
    std::vector<long> qs(g.n);
    for (int b = 0; b < g.n; ++b) {
      double inv = 1.0 / deltas[b];
      qs[b] = std::lround(inv);
      require(std::abs(inv - qs[b]) < 1e-9, "CollapsedTrace: scale ratios must be integer");
    }
    auto spec = field_ops::spectrum(f, comp);
    double peak = 0.0;
    for (const auto& c : spec) peak = std::max(peak, std::abs(c));
    const auto dims = g.dims();
    std::map<long, cd> modes;
    for (std::size_t s = 0; s < spec.size(); ++s) {
      if (std::abs(spec[s]) <= drop_tol * peak) continue;
      std::size_t rem = s;
      long freq = 0;
      for (int a = g.axes() - 1; a >= 0; --a) {
        int k = static_cast<int>(rem % dims[a]);
        rem /= dims[a];
        freq += qs[a] * fft::wrapped_freq(k, dims[a]);
      }
      modes[freq] += spec[s];
    }
    modes_.assign(modes.begin(), modes.end());
  }

  /// Value at t (the coarse variable; the physical point is x = eps1 t).
  double operator()(double t) const {
    double acc = 0.0;
    for (const auto& [freq, c] : modes_) {
      double ph = 2.0 * std::numbers::pi * freq * t;
      acc += c.real() * std::cos(ph) - c.imag() * std::sin(ph);
    }
    return acc;
  }

  std::size_t mode_count() const { return modes_.size(); }

 private:
  std::vector<std::pair<long, cd>> modes_;
};

/// Assemble w_eps = u_eps - u0 - eps1 eta X(x / eps) u0' on (0,1) and return
/// its L2 and H1 norms together with the plain L2 error. All derivative
/// pieces are exact: u_eps' from the flux constant, u0 analytic, X spectral.
inline ExpansionError expansion_error_1d(
    const FineSolution1D& u_eps, const std::function<double(double)>& u0,
    const std::function<double(double)>& du0, const std::function<double(double)>& d2u0,
    const CorrectorSet* correctors, const ScaleVector& scales, int panels) {
  const double eps1 = scales.epsilons[0];
  BoundaryCutoff1D eta{eps1};
  CollapsedTrace xtrace, gtrace;
  if (correctors) {
    std::vector<double> deltas = scales.deltas;
    xtrace = CollapsedTrace(correctors->X[0], 0, deltas);
    TorusField grad =
        field_ops::directional_gradient(correctors->X[0], deltas, correctors->grid.n);
    gtrace = CollapsedTrace(grad, 0, deltas);
  }
  auto Xval = [&](double x) { return correctors ? xtrace(x / eps1) : 0.0; };
  auto dXval = [&](double x) { return correctors ? gtrace(x / eps1) / eps1 : 0.0; };

  auto w = [&](double x) {
    return u_eps(x) - u0(x) - eps1 * eta(x) * Xval(x) * du0(x);
  };
  auto dw = [&](double x) {
    double t1 = u_eps.deriv(x) - du0(x);
    double t2 = eps1 * eta.deriv(x) * Xval(x) * du0(x);
    double t3 = eta(x) * (eps1 * dXval(x)) * du0(x);
    double t4 = eps1 * eta(x) * Xval(x) * d2u0(x);
    return t1 - t2 - t3 - t4;
  };

  ExpansionError err;
  err.cutoff_width = eps1;
  err.l2_error = quad::l2_norm([&](double x) { return u_eps(x) - u0(x); }, 0.0, 1.0, panels);
  err.w_eps_l2 = quad::l2_norm(w, 0.0, 1.0, panels);
  double dnorm = quad::l2_norm(dw, 0.0, 1.0, panels);
  err.w_eps_h1 = std::sqrt(err.w_eps_l2 * err.w_eps_l2 + dnorm * dnorm);
  return err;
}

// ---------------------------------------------------------------------------
// Rate fitting.
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;      // power-law exponent or exponential decay constant
  double prefactor = 0.0;  // multiplicative constant
  double r_squared = 0.0;
  double residual = 0.0;   // RMS residual of the linear fit in log space
};

namespace rate_detail {

inline RateFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() >= 2 && x.size() == y.size(), "rate_fit: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  require(std::abs(denom) > 1e-14 * std::max(1.0, n * sxx),
          "rate_fit: degenerate design matrix");
  RateFit fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - fit.slope * sx) / n;
  fit.prefactor = std::exp(intercept);
  double ss_res = 0.0, ss_tot = 0.0;
  const double ymean = sy / n;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double pred = intercept + fit.slope * x[i];
    ss_res += (y[i] - pred) * (y[i] - pred);
    ss_tot += (y[i] - ymean) * (y[i] - ymean);
  }
  fit.residual = std::sqrt(ss_res / n);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

}  // namespace rate_detail

/// Least-squares fit of log(err) against log(eps): err ~ prefactor * eps^slope.
inline RateFit fit_power_law(const std::vector<double>& eps, const std::vector<double>& err) {
  std::vector<double> lx(eps.size()), ly(err.size());
  for (std::size_t i = 0; i < eps.size(); ++i) {
    require(eps[i] > 0.0 && err[i] > 0.0, "fit_power_law: positive data required");
    lx[i] = std::log(eps[i]);
    ly[i] = std::log(err[i]);
  }
  return rate_detail::linear_fit(lx, ly);
}

/// Least-squares fit of log(err) against the ratio r: err ~ prefactor e^{slope r}
/// (slope < 0 in the exponential-decay regime).
inline RateFit fit_exponential(const std::vector<double>& ratios,
                               const std::vector<double>& err) {
  std::vector<double> ly(err.size());
  for (std::size_t i = 0; i < err.size(); ++i) {
    require(err[i] > 0.0, "fit_exponential: positive data required");
    ly[i] = std::log(err[i]);
  }
  return rate_detail::linear_fit(ratios, ly);
}

}  // namespace homoscale

#endif  // HOMOSCALE_BVP_HPP
