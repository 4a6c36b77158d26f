#ifndef HOMOSCALE_CELL_HPP
#define HOMOSCALE_CELL_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "homoscale/common.hpp"
#include "homoscale/field.hpp"

namespace homoscale {

/// One-scale cell problem on the innermost block, parametric in the outer
/// variables:
///
///   -div_n( A grad_n Y ) + tau^2 Y = div_n F + G     on T^d per outer node
///
/// with <Y>_(inner) = 0 when tau = 0. F may be omitted (divergence source)
/// and G may be omitted (plain source). When tau = 0 solvability requires
/// <G>_(inner) = 0 at every outer node.
struct CellProblem {
  const TorusField* A = nullptr;  // order-2 field on the full grid
  const TorusField* F = nullptr;  // order-1 field or null
  const TorusField* G = nullptr;  // order-0 field or null
  double tau = 0.0;
};

struct SolveDiagnostics {
  std::vector<int> iterations;    // per outer node
  double max_rel_residual = 0.0;  // worst over outer nodes
  double energy_Y = 0.0;          // L2 norm of Y
  double energy_gradY = 0.0;      // L2 norm of grad_n Y
  double energy_ratio = 0.0;      // (|grad Y| + tau |Y|) / (|F| + |G|/tau)
  int worst_node = -1;
};

struct CellSolveOptions {
  double tol = 1e-10;
  int max_iterations = 4000;
  bool project_inner_mean = false;  // subtract <G> per node instead of failing
  bool dealias = true;
  const TorusField* initial_guess = nullptr;
};

namespace cell_detail {

/// Per-outer-node spectral workspace for the inner block.
class InnerOperator {
 public:
  InnerOperator(int d, int res, double tau, bool dealias)
      : d_(d), res_(res), tau_(tau), dealias_(dealias) {
    dims_.assign(d, res);
    big_dims_.assign(d, dealias ? 2 * res : res);
    npts_ = 1;
    for (int v : dims_) npts_ *= v;
    bpts_ = 1;
    for (int v : big_dims_) bpts_ *= v;
    freq_.resize(d_);
    for (int c = 0; c < d_; ++c) {
      freq_[c].resize(npts_);
      for (std::size_t p = 0; p < npts_; ++p) freq_[c][p] = axis_freq(p, c, dims_);
    }
    big_freq_.resize(d_);
    for (int c = 0; c < d_; ++c) {
      big_freq_[c].resize(bpts_);
      for (std::size_t p = 0; p < bpts_; ++p) big_freq_[c][p] = axis_freq(p, c, big_dims_);
    }
  }

  std::size_t npts() const { return npts_; }

  /// Load the coefficient slice for one outer node and build the padded
  /// samples plus the mean-coefficient preconditioner symbol.
  void set_coefficient(const TorusField& A, std::size_t outer_node) {
    const int dd = d_ * d_;
    a_big_.assign(dd, std::vector<double>(bpts_));
    Mat mean(d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) {
        const double* slice = A.comp(i * d_ + j).data() + outer_node * npts_;
        double acc = 0.0;
        for (std::size_t p = 0; p < npts_; ++p) acc += slice[p];
        mean(i, j) = acc / static_cast<double>(npts_);
        if (dealias_) {
          auto spec = fft::to_complex(slice, npts_);
          fft::forward(spec, dims_);
          auto pad = fft::pad_spectrum(spec, dims_, big_dims_);
          fft::inverse(pad, big_dims_);
          for (std::size_t p = 0; p < bpts_; ++p) a_big_[i * d_ + j][p] = pad[p].real();
        } else {
          for (std::size_t p = 0; p < npts_; ++p) a_big_[i * d_ + j][p] = slice[p];
        }
      }
    symmetric_ = true;
    for (int i = 0; i < d_; ++i)
      for (int j = i + 1; j < d_; ++j)
        if (std::abs(mean(i, j) - mean(j, i)) > 1e-12) symmetric_ = false;
    // Preconditioner: constant-coefficient symbol of the symmetrized mean.
    // The zero mode is handled outside the Krylov loop, so its entry is 0.
    precond_.resize(npts_);
    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t p = 0; p < npts_; ++p) {
      double q = tau_ * tau_;
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j)
          q += 0.5 * (mean(i, j) + mean(j, i)) * (two_pi * freq_[i][p]) * (two_pi * freq_[j][p]);
      precond_[p] = (p == 0 || q <= 0.0) ? 0.0 : 1.0 / q;
    }
  }

  bool symmetric() const { return symmetric_; }

  /// y = -div(A grad x) + tau^2 x with dealiased products.
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    // Gradient in spectral space, once.
    auto spec = fft::to_complex(x.data(), npts_);
    fft::forward(spec, dims_);
    std::vector<std::vector<double>> grad(d_);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int m = 0; m < d_; ++m) {
      std::vector<cd> g(npts_);
      for (std::size_t p = 0; p < npts_; ++p) {
        double f = freq_[m][p];
        bool nyq = nyquist_axis(p, m, dims_);
        g[p] = nyq ? cd(0.0, 0.0) : spec[p] * cd(0.0, two_pi * f);
      }
      if (dealias_) {
        auto pad = fft::pad_spectrum(g, dims_, big_dims_);
        fft::inverse(pad, big_dims_);
        grad[m].resize(bpts_);
        for (std::size_t p = 0; p < bpts_; ++p) grad[m][p] = pad[p].real();
      } else {
        fft::inverse(g, dims_);
        grad[m].resize(npts_);
        for (std::size_t p = 0; p < npts_; ++p) grad[m][p] = g[p].real();
      }
    }
    // Flux w_i = A_im grad_m, pointwise on the padded grid, then divergence.
    std::vector<cd> div_acc(npts_, cd(0.0, 0.0));
    const auto& pdims = dealias_ ? big_dims_ : dims_;
    const auto& pfreq = dealias_ ? big_freq_ : freq_;
    const std::size_t ppts = dealias_ ? bpts_ : npts_;
    for (int i = 0; i < d_; ++i) {
      std::vector<cd> w(ppts);
      for (std::size_t p = 0; p < ppts; ++p) {
        double acc = 0.0;
        for (int m = 0; m < d_; ++m) acc += a_big_[i * d_ + m][p] * grad[m][p];
        w[p] = cd(acc, 0.0);
      }
      fft::forward(w, pdims);
      for (std::size_t p = 0; p < ppts; ++p) {
        double f = pfreq[i][p];
        bool nyq = nyquist_axis(p, i, pdims);
        w[p] = nyq ? cd(0.0, 0.0) : w[p] * cd(0.0, two_pi * f);
      }
      auto tr = dealias_ ? fft::truncate_spectrum(w, big_dims_, dims_) : std::move(w);
      for (std::size_t p = 0; p < npts_; ++p) div_acc[p] += tr[p];
    }
    fft::inverse(div_acc, dims_);
    for (std::size_t p = 0; p < npts_; ++p) y[p] = -div_acc[p].real() + tau_ * tau_ * x[p];
  }

  /// z = M^{-1} r via the constant-coefficient symbol.
  void precondition(const std::vector<double>& r, std::vector<double>& z) const {
    auto spec = fft::to_complex(r.data(), npts_);
    fft::forward(spec, dims_);
    for (std::size_t p = 0; p < npts_; ++p) spec[p] *= precond_[p];
    fft::inverse(spec, dims_);
    for (std::size_t p = 0; p < npts_; ++p) z[p] = spec[p].real();
  }

  /// Projection onto the solution space: zero mean and no Nyquist content.
  /// First derivatives annihilate Nyquist bins, so there the operator only
  /// sees tau^2 and roundoff content would be amplified without bound.
  void project(std::vector<double>& v) const {
    auto spec = fft::to_complex(v.data(), npts_);
    fft::forward(spec, dims_);
    spec[0] = cd(0.0, 0.0);
    for (std::size_t p = 1; p < npts_; ++p) {
      for (int c = 0; c < d_; ++c) {
        if (axis_index(p, c, dims_) == dims_[c] / 2) {
          spec[p] = cd(0.0, 0.0);
          break;
        }
      }
    }
    fft::inverse(spec, dims_);
    for (std::size_t p = 0; p < npts_; ++p) v[p] = spec[p].real();
  }

 private:
  static int axis_index(std::size_t p, int axis, const std::vector<int>& dims) {
    std::size_t stride = 1;
    for (std::size_t a = dims.size(); a-- > static_cast<std::size_t>(axis) + 1;)
      stride *= dims[a];
    return static_cast<int>((p / stride) % dims[axis]);
  }
  static double axis_freq(std::size_t p, int axis, const std::vector<int>& dims) {
    return fft::wrapped_freq(axis_index(p, axis, dims), dims[axis]);
  }
  static bool nyquist_axis(std::size_t p, int axis, const std::vector<int>& dims) {
    return axis_index(p, axis, dims) == dims[axis] / 2;
  }

  int d_;
  int res_;
  double tau_;
  bool dealias_;
  std::vector<int> dims_, big_dims_;
  std::size_t npts_ = 0, bpts_ = 0;
  std::vector<std::vector<double>> freq_, big_freq_;
  std::vector<std::vector<double>> a_big_;
  std::vector<double> precond_;
  bool symmetric_ = true;
};

struct KrylovResult {
  int iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline KrylovResult pcg(const InnerOperator& op, const std::vector<double>& b,
                        std::vector<double>& x, double tol, int max_it, bool project,
                        double abs_floor) {
  const std::size_t n = b.size();
  std::vector<double> r(n), z(n), p(n), Ap(n);
  op.apply(x, Ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
  if (project) op.project(r);
  const double bnorm = std::sqrt(dot(b, b));
  const double target = std::max(tol * bnorm, abs_floor);
  KrylovResult res;
  if (bnorm <= abs_floor) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  op.precondition(r, z);
  if (project) op.project(z);
  p = z;
  double rz = dot(r, z);
  for (int it = 0; it < max_it; ++it) {
    op.apply(p, Ap);
    double pAp = dot(p, Ap);
    if (pAp == 0.0) break;
    double alpha = rz / pAp;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    if (project) op.project(r);
    double rn = std::sqrt(dot(r, r));
    res.iterations = it + 1;
    res.rel_residual = rn / bnorm;
    if (rn <= target) {
      res.converged = true;
      if (project) op.project(x);
      return res;
    }
    op.precondition(r, z);
    if (project) op.project(z);
    double rz_new = dot(r, z);
    double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  res.converged = false;
  return res;
}

/// Transpose-free BiCGStab fallback for nonsymmetric coefficients.
inline KrylovResult bicgstab(const InnerOperator& op, const std::vector<double>& b,
                             std::vector<double>& x, double tol, int max_it, bool project,
                             double abs_floor) {
  const std::size_t n = b.size();
  std::vector<double> r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), z(n), y(n);
  op.apply(x, v);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - v[i];
  if (project) op.project(r);
  r0 = r;
  const double bnorm = std::sqrt(dot(b, b));
  const double target = std::max(tol * bnorm, abs_floor);
  KrylovResult res;
  if (bnorm <= abs_floor) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  double rho = 1.0, alpha = 1.0, omega = 1.0;
  std::fill(v.begin(), v.end(), 0.0);
  for (int it = 0; it < max_it; ++it) {
    double rho_new = dot(r0, r);
    if (rho_new == 0.0) break;
    if (it == 0) {
      p = r;
    } else {
      double beta = (rho_new / rho) * (alpha / omega);
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
    }
    rho = rho_new;
    op.precondition(p, y);
    if (project) op.project(y);
    op.apply(y, v);
    if (project) op.project(v);
    alpha = rho / dot(r0, v);
    for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
    op.precondition(s, z);
    if (project) op.project(z);
    op.apply(z, t);
    if (project) op.project(t);
    double tt = dot(t, t);
    omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * y[i] + omega * z[i];
      r[i] = s[i] - omega * t[i];
    }
    if (project) op.project(r);
    double rn = std::sqrt(dot(r, r));
    res.iterations = it + 1;
    res.rel_residual = rn / bnorm;
    if (rn <= target) {
      res.converged = true;
      if (project) op.project(x);
      return res;
    }
    if (omega == 0.0) break;
  }
  res.converged = false;
  return res;
}

}  // namespace cell_detail

/// Solve the cell problem at every outer node. Outer nodes are independent
/// and run in parallel; diagnostics are reduced in node order.
inline std::pair<TorusField, SolveDiagnostics> solve_inner(const CellProblem& problem,
                                                           const CellSolveOptions& opts = {}) {
  require(problem.A != nullptr, "solve_inner: coefficient required");
  const TorusField& A = *problem.A;
  const GridSpec& g = A.grid();
  require(A.order() == 2, "solve_inner: coefficient must be a matrix field");
  require(opts.tol > 0.0, "solve_inner: tol must be positive");
  if (problem.F) {
    require(problem.F->grid() == g, "solve_inner: F grid mismatch");
    require(problem.F->order() == 1, "solve_inner: F must be a vector field");
  }
  if (problem.G) {
    require(problem.G->grid() == g, "solve_inner: G grid mismatch");
    require(problem.G->order() == 0, "solve_inner: G must be a scalar field");
  }

  const int d = g.d;
  const int inner_res = g.res[g.n - 1];
  const std::size_t inner = g.block_points(g.n - 1);
  const std::size_t nouter = g.npoints() / inner;
  const double tau2 = problem.tau * problem.tau;

  // Build the right-hand side b = div_n F + G on the full grid.
  TorusField rhs(g, 0);
  if (problem.F) rhs += field_ops::block_divergence(*problem.F, g.n - 1);
  if (problem.G) {
    TorusField gsrc = *problem.G;
    if (problem.tau == 0.0) {
      // Solvability: the inner mean of G must vanish at every outer node.
      const auto& s = gsrc.comp(0);
      double scale = 0.0;
      for (double v : s) scale = std::max(scale, std::abs(v));
      for (std::size_t o = 0; o < nouter; ++o) {
        double mean = 0.0;
        for (std::size_t i = 0; i < inner; ++i) mean += s[o * inner + i];
        mean /= static_cast<double>(inner);
        if (std::abs(mean) > std::max(1e-10 * scale, 1e-13)) {
          if (!opts.project_inner_mean)
            throw ValidationError("solve_inner: <G> != 0 at an outer node with tau = 0");
        }
      }
      if (opts.project_inner_mean) field_ops::project_inner_mean(gsrc);
    }
    rhs += gsrc;
  }

  TorusField Y(g, 0);
  SolveDiagnostics diag;
  diag.iterations.assign(nouter, 0);
  std::vector<double> residuals(nouter, 0.0);
  std::vector<int> failures(nouter, 0);

  // Absolute tolerance floor: outer nodes whose right-hand side is pure
  // cancellation noise relative to the problem scale get the zero solution.
  double global_b = 0.0;
  {
    const auto& s = rhs.comp(0);
    for (std::size_t o = 0; o < nouter; ++o) {
      double acc = 0.0;
      for (std::size_t i = 0; i < inner; ++i) acc += s[o * inner + i] * s[o * inner + i];
      global_b = std::max(global_b, std::sqrt(acc));
    }
  }
  const double abs_floor = 1e-13 * global_b;

  // The Krylov loop always runs in the mean-free subspace; the mean of the
  // solution is fixed by the zero-order term (tau > 0) or pinned to zero.
  parallel_for(nouter, [&](std::size_t o) {
    cell_detail::InnerOperator op(d, inner_res, problem.tau, opts.dealias);
    op.set_coefficient(A, o);
    std::vector<double> b(inner), x(inner, 0.0);
    const double* bsrc = rhs.comp(0).data() + o * inner;
    std::copy(bsrc, bsrc + inner, b.begin());
    double b_mean = 0.0, b_scale = 0.0;
    for (double v : b) {
      b_mean += v;
      b_scale = std::max(b_scale, std::abs(v));
    }
    b_mean /= static_cast<double>(inner);
    // Means below roundoff are exact zeros of divergence-form sources; do not
    // let 1/tau^2 amplify them.
    if (std::abs(b_mean) <= 1e-13 * b_scale) b_mean = 0.0;
    const double x_mean = tau2 > 0.0 ? b_mean / tau2 : 0.0;
    op.project(b);
    if (opts.initial_guess) {
      const double* xs = opts.initial_guess->comp(0).data() + o * inner;
      std::copy(xs, xs + inner, x.begin());
      op.project(x);
    }
    cell_detail::KrylovResult kr =
        op.symmetric()
            ? cell_detail::pcg(op, b, x, opts.tol, opts.max_iterations, true, abs_floor)
            : cell_detail::bicgstab(op, b, x, opts.tol, opts.max_iterations, true, abs_floor);
    diag.iterations[o] = kr.iterations;
    residuals[o] = kr.rel_residual;
    failures[o] = kr.converged ? 0 : 1;
    double* dst = Y.comp(0).data() + o * inner;
    for (std::size_t i = 0; i < inner; ++i) dst[i] = x[i] + x_mean;
  });

  for (std::size_t o = 0; o < nouter; ++o) {
    if (residuals[o] > diag.max_rel_residual) {
      diag.max_rel_residual = residuals[o];
      diag.worst_node = static_cast<int>(o);
    }
    if (failures[o]) {
      std::ostringstream msg;
      msg << "solve_inner: no convergence at outer node " << o << " (rel residual "
          << residuals[o] << " after " << diag.iterations[o] << " iterations)";
      throw SolverError(msg.str());
    }
  }

  diag.energy_Y = field_ops::l2_norm(Y);
  diag.energy_gradY = field_ops::l2_norm(field_ops::scale_partial(Y, g.n - 1, 1));
  double source = 0.0;
  if (problem.F) source += field_ops::l2_norm(*problem.F);
  if (problem.G && problem.tau > 0.0) source += field_ops::l2_norm(*problem.G) / problem.tau;
  if (problem.G && problem.tau == 0.0) source += field_ops::l2_norm(*problem.G);
  diag.energy_ratio = source > 0.0 ? (diag.energy_gradY + problem.tau * diag.energy_Y) / source : 0.0;
  return {std::move(Y), std::move(diag)};
}

/// Discrete residual norm of a candidate solution: the L2 norm (per outer
/// node) of -div_n(A grad_n Y) + tau^2 Y - div_n F - G, maximized over outer
/// nodes. Uses the same dealiased operator as the solver.
inline double residual_inner(const CellProblem& problem, const TorusField& Y,
                             bool dealias = true) {
  const TorusField& A = *problem.A;
  const GridSpec& g = A.grid();
  const int d = g.d;
  const int inner_res = g.res[g.n - 1];
  const std::size_t inner = g.block_points(g.n - 1);
  const std::size_t nouter = g.npoints() / inner;

  TorusField rhs(g, 0);
  if (problem.F) rhs += field_ops::block_divergence(*problem.F, g.n - 1);
  if (problem.G) rhs += *problem.G;

  std::vector<double> norms(nouter, 0.0);
  parallel_for(nouter, [&](std::size_t o) {
    cell_detail::InnerOperator op(d, inner_res, problem.tau, dealias);
    op.set_coefficient(A, o);
    std::vector<double> x(inner), Lx(inner);
    const double* ys = Y.comp(0).data() + o * inner;
    std::copy(ys, ys + inner, x.begin());
    op.apply(x, Lx);
    const double* bs = rhs.comp(0).data() + o * inner;
    double acc = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      double r = Lx[i] - bs[i];
      acc += r * r;
    }
    norms[o] = std::sqrt(acc / static_cast<double>(inner));
  });
  return *std::max_element(norms.begin(), norms.end());
}

}  // namespace homoscale

#endif  // HOMOSCALE_CELL_HPP
