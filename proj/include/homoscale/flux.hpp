#ifndef HOMOSCALE_FLUX_HPP
#define HOMOSCALE_FLUX_HPP

#include <cmath>
#include <vector>

#include "homoscale/corrector.hpp"

namespace homoscale {

/// Flux-corrector machinery: the potential U solving the degenerate Poisson
/// problem -hat_lap U + tau^2 U = G on the product torus, built by the same
/// truncated expansion in the smallest scale ratio, and the antisymmetric
/// corrector Phi assembled from first derivatives of U. Every sub-solve here
/// is constant coefficient and handled by exact mode division.
namespace flux_detail {

/// Frequency of one axis with the Nyquist bin treated as zero, matching the
/// first-derivative convention used everywhere else.
inline double axis_freq_zero_nyquist(std::size_t p, int axis, const std::vector<int>& dims) {
  std::size_t stride = 1;
  for (std::size_t a = dims.size(); a-- > static_cast<std::size_t>(axis) + 1;) stride *= dims[a];
  int idx = static_cast<int>((p / stride) % dims[axis]);
  if (idx == dims[axis] / 2) return 0.0;
  return fft::wrapped_freq(idx, dims[axis]);
}

/// Solve -lap_inner U = rhs per outer node with zero inner mean, by spectral
/// division on the innermost block. The inner mean of the rhs must vanish
/// analytically; whatever is left of it numerically is dropped.
inline TorusField inner_poisson(const TorusField& rhs) {
  const GridSpec& g = rhs.grid();
  const int inner0 = (g.n - 1) * g.d;
  const auto dims = g.dims();
  const double two_pi = 2.0 * std::numbers::pi;
  TorusField out(g, rhs.order());
  for (std::size_t c = 0; c < rhs.ncomp(); ++c) {
    auto spec = fft::to_complex(rhs.comp(c).data(), rhs.npoints());
    for (int a = inner0; a < g.axes(); ++a) fft::transform_axis(spec, dims, a, -1);
    for (std::size_t p = 0; p < spec.size(); ++p) {
      double q = 0.0;
      for (int a = inner0; a < g.axes(); ++a) {
        double f = axis_freq_zero_nyquist(p, a, dims);
        q += (two_pi * f) * (two_pi * f);
      }
      spec[p] = q > 0.0 ? spec[p] / q : cd(0.0, 0.0);
    }
    for (int a = inner0; a < g.axes(); ++a) fft::transform_axis(spec, dims, a, +1);
    fft::real_part(spec, out.comp(c).data());
  }
  return out;
}

/// Solve -hat_lap_m U + tau^2 U = rhs on an m-block grid directly in Fourier
/// space. Used as the recursion base case where no small ratio is left.
inline TorusField direct_hat_poisson(const TorusField& rhs, const std::vector<double>& deltas,
                                     double tau) {
  const GridSpec& g = rhs.grid();
  const auto dims = g.dims();
  const double two_pi = 2.0 * std::numbers::pi;
  const double tau2 = tau * tau;
  TorusField out(g, rhs.order());
  for (std::size_t c = 0; c < rhs.ncomp(); ++c) {
    auto spec = fft::to_complex(rhs.comp(c).data(), rhs.npoints());
    fft::forward(spec, dims);
    for (std::size_t p = 0; p < spec.size(); ++p) {
      if (p == 0) {
        // <G> = 0 is a solvability precondition at every level; the residual
        // numerical mean must not be amplified by 1/tau^2.
        spec[p] = cd(0.0, 0.0);
        continue;
      }
      double q = tau2;
      for (int comp = 0; comp < g.d; ++comp) {
        double acc = 0.0;
        for (int b = 0; b < g.n; ++b)
          acc += axis_freq_zero_nyquist(p, b * g.d + comp, dims) / deltas[b];
        q += (two_pi * acc) * (two_pi * acc);
      }
      spec[p] = q > 0.0 ? spec[p] / q : cd(0.0, 0.0);
    }
    fft::inverse(spec, dims);
    fft::real_part(spec, out.comp(c).data());
  }
  return out;
}

}  // namespace flux_detail

struct FluxSolveResult {
  TorusField U;                   // truncated potential
  double defect_l2 = 0.0;         // truncation defect of this level
  double child_defect_l2 = 0.0;   // accumulated defects of reduced solves
  std::vector<TorusField> terms;  // U_0 (lifted), U_2 ... U_K when kept
};

/// Truncated expansion for -hat_lap_b U + tau^2 U = G with <G> = 0:
///   U_0 on the outer blocks solves the reduced problem with <G>_(inner),
///   U_1 = 0,
///   -lap_n U_2 = G - <G>_(inner),
///   -lap_n U_{k+2} = 2 hat_grad . grad_n U_{k+1} + hat_lap U_k - tau^2 U_k.
inline FluxSolveResult flux_solve(const TorusField& G, const std::vector<double>& deltas,
                                  double tau, const TruncationPlan& plan, int blocks,
                                  bool keep_terms = false) {
  FluxSolveResult out;
  if (blocks == 1) {
    out.U = flux_detail::direct_hat_poisson(G, deltas, tau);
    return out;
  }
  const GridSpec& g = G.grid();
  const int inner_block = blocks - 1;
  const double dn = deltas[inner_block];
  const double tau2 = tau * tau;
  const int K = std::max(2, plan.k_for_block(inner_block));

  TorusField g_avg = field_ops::inner_average(G);
  TorusField g_osc = G - field_ops::lift_inner(g_avg, g);

  FluxSolveResult reduced = flux_solve(g_avg, deltas, tau, plan, blocks - 1, false);
  out.child_defect_l2 = reduced.defect_l2 + reduced.child_defect_l2;
  TorusField u0 = field_ops::lift_inner(reduced.U, g);

  auto hat_lap = [&](const TorusField& u) {
    return field_ops::directional_divergence(
        field_ops::directional_gradient(u, deltas, blocks - 1), deltas, blocks - 1);
  };

  std::vector<TorusField> terms(K + 1);
  terms[2] = flux_detail::inner_poisson(g_osc);
  for (int k = 1; k + 2 <= K; ++k) {
    TorusField rhs = 2.0 * field_ops::directional_divergence(
                               field_ops::scale_partial(terms[k + 1], inner_block, 1), deltas,
                               blocks - 1);
    if (k >= 2) {
      rhs += hat_lap(terms[k]);
      rhs -= tau2 * terms[k];
    }
    terms[k + 2] = flux_detail::inner_poisson(rhs);
  }

  TorusField V = u0;
  double w = dn;
  for (int j = 2; j <= K; ++j) {
    w *= dn;
    V += w * terms[j];
  }

  // Truncation defect:
  //   dn^K (-hat_lap U_K + tau^2 U_K)
  // + dn^{K-1} (-2 hat_grad . grad_n U_K - hat_lap U_{K-1} + tau^2 U_{K-1}),
  // where U_{K-1} means the order-(K-1) oscillating term (U_1 = 0).
  {
    const double wk = std::pow(dn, K);
    TorusField E = wk * (tau2 * terms[K] - hat_lap(terms[K]));
    TorusField cross = field_ops::directional_divergence(
        field_ops::scale_partial(terms[K], inner_block, 1), deltas, blocks - 1);
    E -= (2.0 * wk / dn) * cross;
    if (K - 1 >= 2) E += std::pow(dn, K - 1) * (tau2 * terms[K - 1] - hat_lap(terms[K - 1]));
    out.defect_l2 = field_ops::l2_norm(E);
  }

  if (keep_terms) {
    out.terms.push_back(u0);
    for (int j = 2; j <= K; ++j) out.terms.push_back(terms[j]);
  }
  out.U = std::move(V);
  return out;
}

/// Flux correctors for a coefficient/corrector pair.
struct FluxSet {
  GridSpec grid;
  std::vector<double> deltas;
  double tau = 0.0;
  TorusField U;    // order-2 potential
  TorusField Phi;  // order-3 corrector, Phi_{lij} = -Phi_{ilj} exactly
  TorusField G;    // order-2 source Abar - A - A hat_grad X
  double defect_l2 = 0.0;
  double child_defect_l2 = 0.0;
  std::vector<double> mean_G;  // componentwise <G>, vanishes by construction
};

/// Assemble G = Abar - A - A hat_grad X, solve for the potential and build
/// Phi_{lij} = (hat_grad)_l U_ij - (hat_grad)_i U_lj.
inline FluxSet build_flux(const TorusField& A, const std::vector<TorusField>& X, const Mat& Abar,
                          const ScaleVector& scales, const TruncationPlan& plan) {
  const GridSpec& g = A.grid();
  const int d = g.d;
  require(static_cast<int>(X.size()) == d, "build_flux: one corrector per direction");
  // The flux construction needs only weak separation between neighbors.
  for (int j = 1; j < scales.n(); ++j)
    require(scales.epsilons[j] <= 0.5 * scales.epsilons[j - 1],
            "build_flux: weak separation eps_{j+1} <= eps_j / 2 violated");
  FluxSet set;
  set.grid = g;
  set.deltas = scales.deltas;
  set.tau = plan.tau;

  field_ops::PaddedMatrix PA(A);
  TorusField G(g, 2);
  for (int j = 0; j < d; ++j) {
    TorusField flux = PA.matvec(field_ops::directional_gradient(X[j], scales.deltas, g.n));
    flux += field_ops::column(A, j);
    for (int i = 0; i < d; ++i) {
      auto src = flux.comp(i);
      auto dst = G.comp(i * d + j);
      for (std::size_t p = 0; p < src.size(); ++p) dst[p] = Abar(i, j) - src[p];
    }
  }
  set.mean_G = field_ops::full_average(G);
  for (double m : set.mean_G)
    require(std::abs(m) <= 1e-8, "build_flux: <G> != 0; the effective matrix is inconsistent");

  FluxSolveResult r = flux_solve(G, scales.deltas, plan.tau, plan, g.n);
  set.defect_l2 = r.defect_l2;
  set.child_defect_l2 = r.child_defect_l2;
  set.U = std::move(r.U);
  set.G = std::move(G);

  // Phi stores each l < i entry once; the mirror entries are exact negations
  // and the diagonal is exactly zero, so antisymmetry holds bitwise.
  TorusField dU = field_ops::directional_gradient(set.U, scales.deltas, g.n);  // comp (i j l)
  TorusField Phi(g, 3);                                                        // comp (l i j)
  for (int l = 0; l < d; ++l)
    for (int i = l + 1; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        auto a = dU.comp((i * d + j) * d + l);  // (hat_grad)_l U_ij
        auto b = dU.comp((l * d + j) * d + i);  // (hat_grad)_i U_lj
        auto dst = Phi.comp((l * d + i) * d + j);
        auto mirror = Phi.comp((i * d + l) * d + j);
        for (std::size_t p = 0; p < a.size(); ++p) {
          double v = a[p] - b[p];
          dst[p] = v;
          mirror[p] = -v;
        }
      }
  set.Phi = std::move(Phi);
  return set;
}

inline FluxSet build_flux(const TorusField& A, const CorrectorSet& correctors, const Mat& Abar,
                          const ScaleVector& scales, const TruncationPlan& plan) {
  return build_flux(A, correctors.X, Abar, scales, plan);
}

struct FluxResidual {
  double total = 0.0;          // sup |B + B grad X - Abar - div Phi|
  double grad_div_term = 0.0;  // sup |hat_grad (hat_grad . U)|
  double tau2_term = 0.0;      // tau^2 sup |U|
  double route_gap = 0.0;      // disagreement of the two evaluation paths
};

/// Sup norm of the divergence identity on the lifted torus, together with its
/// two structural contributors and a cross-check along the second algebraic
/// route hat_grad(hat_grad . U) - tau^2 U - (equation defect).
inline FluxResidual flux_identity_residual(const TorusField& A, const std::vector<TorusField>& X,
                                           const Mat& Abar, const FluxSet& flux,
                                           const ScaleVector& scales) {
  const GridSpec& g = A.grid();
  const int d = g.d;
  const double tau2 = flux.tau * flux.tau;
  field_ops::PaddedMatrix PA(A);

  TorusField R(g, 2);
  for (int j = 0; j < d; ++j) {
    TorusField fluxv = PA.matvec(field_ops::directional_gradient(X[j], scales.deltas, g.n));
    fluxv += field_ops::column(A, j);
    for (int i = 0; i < d; ++i) {
      auto src = fluxv.comp(i);
      auto dst = R.comp(i * d + j);
      for (std::size_t p = 0; p < src.size(); ++p) dst[p] = src[p] - Abar(i, j);
    }
  }
  R -= field_ops::directional_divergence_first_index(flux.Phi, scales.deltas, g.n);
  FluxResidual out;
  out.total = field_ops::linf_norm(R);

  TorusField divU = field_ops::directional_divergence_first_index(flux.U, scales.deltas, g.n);
  TorusField gd = field_ops::directional_gradient_first_index(divU, scales.deltas, g.n);
  out.grad_div_term = field_ops::linf_norm(gd);
  out.tau2_term = tau2 * field_ops::linf_norm(flux.U);

  // R = hat_grad(hat_grad . U) - tau^2 U + D with D the discrete residual of
  // the potential equation (exact algebra of the spectral operators).
  TorusField path2 = gd - tau2 * flux.U;
  TorusField lapU = field_ops::directional_divergence(
      field_ops::directional_gradient(flux.U, scales.deltas, g.n), scales.deltas, g.n);
  TorusField defect = tau2 * flux.U - lapU - flux.G;
  path2 += defect;
  out.route_gap = field_ops::linf_norm(R - path2);
  return out;
}

}  // namespace homoscale

#endif  // HOMOSCALE_FLUX_HPP
