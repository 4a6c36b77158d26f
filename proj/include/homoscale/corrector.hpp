#ifndef HOMOSCALE_CORRECTOR_HPP
#define HOMOSCALE_CORRECTOR_HPP

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "homoscale/cell.hpp"
#include "homoscale/scales.hpp"

namespace homoscale {

/// Calibration constants for truncation-order and tau selection. The theory
/// behind the separation checks only asserts existence of workable values;
/// these defaults are empirical and exposed for sweeps.
struct PlanConfig {
  double default_gap_constant = 0.1;        // c_j in the separation test
  std::map<int, double> gap_constants;      // per-gap overrides, key = gap index (2..n)
  double tau_constant = 0.5;                // c in tau^2 = exp(-c min_j ratio_j)
  double k_gamma = 1.0;                     // k_j = floor(k_gamma * ratio_j)
  int k_cap = 12;
  double condition_margin = 1.0;            // constant in the recorded feasibility checks
  int ell0 = -1;                            // derivative depth; -1 selects [n d / 2] + 1
  int d = 1;                                // spatial dimension (for the ell0 default)
  std::optional<double> fixed_tau;          // overrides the tau rule
  std::optional<int> fixed_k;               // overrides every k_j

  double gap_constant(int gap) const {
    auto it = gap_constants.find(gap);
    return it == gap_constants.end() ? default_gap_constant : it->second;
  }
};

struct GapCheck {
  int gap = 0;             // index j in 2..n, between eps_{j-1} and eps_j
  double eps = 0.0;        // eps_j
  double ratio = 0.0;      // eps_{j-1} / eps_j
  double bound = 0.0;      // c_j eps_{j-1} / (1 + log(eps_1 / eps_{j-1}))
  bool separated = false;  // eps_j <= bound
  int k = 1;               // truncation order for this gap
  bool cond_delta = false; // (delta_j/delta_{j-1}) M (ell0 + k_j) <= 1/e
  bool cond_tau = false;   // tau^2 >= M delta_{j-1}^{-1} e^{-k_j + 1}
};

struct TruncationPlan {
  std::vector<GapCheck> gaps;  // one entry per gap, ordered j = 2..n
  double tau = 0.0;
  int ell0 = 1;
  PlanConfig config;

  bool all_separated() const {
    for (const auto& g : gaps)
      if (!g.separated) return false;
    return true;
  }
  /// Truncation order used when the block with 0-based index `b` is split off
  /// (gap j = b + 1).
  int k_for_block(int b) const { return gaps.at(b - 1).k; }

  std::string violation_summary() const {
    std::ostringstream os;
    for (const auto& g : gaps)
      if (!g.separated)
        os << " gap " << g.gap << ": eps = " << g.eps << " exceeds bound " << g.bound << ";";
    return os.str();
  }
};

/// Evaluate the separation tests and pick (k_j, tau) for a scale vector.
inline TruncationPlan choose_parameters(const ScaleVector& scales, const PlanConfig& config = {}) {
  TruncationPlan plan;
  plan.config = config;
  const int n = scales.n();
  plan.ell0 = config.ell0 >= 0 ? config.ell0 : (n * config.d) / 2 + 1;

  double min_ratio = std::numeric_limits<double>::infinity();
  for (int j = 2; j <= n; ++j) {
    GapCheck gc;
    gc.gap = j;
    gc.eps = scales.epsilons[j - 1];
    gc.ratio = scales.epsilons[j - 2] / scales.epsilons[j - 1];
    const double cj = config.gap_constant(j);
    gc.bound = cj * scales.epsilons[j - 2] /
               (1.0 + std::log(scales.epsilons[0] / scales.epsilons[j - 2]));
    gc.separated = scales.epsilons[j - 1] <= gc.bound;
    int k = static_cast<int>(std::floor(config.k_gamma * gc.ratio));
    gc.k = std::min(std::max(k, 1), config.k_cap);
    if (config.fixed_k) gc.k = *config.fixed_k;
    plan.gaps.push_back(gc);
    min_ratio = std::min(min_ratio, gc.ratio);
  }
  if (config.fixed_tau) {
    plan.tau = *config.fixed_tau;
  } else if (n >= 2) {
    plan.tau = std::sqrt(std::exp(-config.tau_constant * min_ratio));
  } else {
    plan.tau = 0.0;
  }
  // Record the feasibility conditions behind the truncated expansion.
  for (auto& gc : plan.gaps) {
    const int j = gc.gap;
    const double dj = scales.deltas[j - 1];
    const double djm1 = scales.deltas[j - 2];
    const double M = config.condition_margin;
    gc.cond_delta = (dj / djm1) * M * (plan.ell0 + gc.k) <= std::exp(-1.0);
    gc.cond_tau = plan.tau * plan.tau >= M * std::exp(-gc.k + 1.0) / djm1;
  }
  return plan;
}

/// Inner correctors chi_j of the innermost block, parametric in the outer
/// variables: -div_n(A grad_n chi_j) = div_n(A e_j), <chi_j>_(inner) = 0.
inline std::vector<TorusField> one_scale_corrector(const TorusField& A,
                                                   const CellSolveOptions& opts = {}) {
  const int d = A.grid().d;
  std::vector<TorusField> chi;
  chi.reserve(d);
  for (int j = 0; j < d; ++j) {
    TorusField Fj = field_ops::column(A, j);
    CellProblem p{&A, &Fj, nullptr, 0.0};
    auto [Y, diag] = solve_inner(p, opts);
    chi.push_back(std::move(Y));
  }
  return chi;
}

/// One-step homogenization of the innermost block:
/// Ahat = < A + A grad_n chi >_(inner), a matrix field on the outer blocks.
inline TorusField hat_matrix(const TorusField& A, const std::vector<TorusField>& chi) {
  const GridSpec& g = A.grid();
  const int d = g.d;
  require(static_cast<int>(chi.size()) == d, "hat_matrix: one corrector per direction");
  field_ops::PaddedMatrix PA(A);
  require(g.n >= 2, "hat_matrix: needs at least two blocks; use hat_matrix_constant");
  TorusField out(g.outer(), 2);
  for (int j = 0; j < d; ++j) {
    TorusField flux = PA.matvec(field_ops::scale_partial(chi[j], g.n - 1, 1));
    flux += field_ops::column(A, j);
    TorusField avg = field_ops::inner_average(flux);
    for (int i = 0; i < d; ++i) {
      auto src = avg.comp(i);
      auto dst = out.comp(i * d + j);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  }
  return out;
}

/// Fully averaged variant for a single-block coefficient.
inline Mat hat_matrix_constant(const TorusField& A, const std::vector<TorusField>& chi) {
  const int d = A.grid().d;
  field_ops::PaddedMatrix PA(A);
  Mat out(d);
  for (int j = 0; j < d; ++j) {
    TorusField flux = PA.matvec(field_ops::scale_partial(chi[j], A.grid().n - 1, 1));
    flux += field_ops::column(A, j);
    auto avg = field_ops::full_average(flux);
    for (int i = 0; i < d; ++i) out(i, j) = avg[i];
  }
  return out;
}

/// Reiterated-homogenization ladder: level b holds the coefficient on b
/// blocks, its inner correctors and the once-homogenized coefficient that
/// seeds level b-1. Shared by the expansion solver (the reduced equations use
/// the same homogenized coefficients) and by the classical reiterated matrix.
class CoefficientLadder {
 public:
  struct Level {
    TorusField A;                  // coefficient on `blocks` blocks
    std::vector<TorusField> chi;   // d inner correctors (tau = 0)
    TorusField Ahat;               // blocks-1 blocks (unused when blocks == 1)
    std::shared_ptr<field_ops::PaddedMatrix> padded;  // cached products with A
    int blocks = 0;
  };

  CoefficientLadder(const TorusField& A, const CellSolveOptions& opts = {}) {
    int b = A.grid().n;
    levels_.reserve(b);
    TorusField cur = A;
    while (true) {
      Level lvl;
      lvl.blocks = b;
      lvl.A = cur;
      lvl.chi = one_scale_corrector(lvl.A, opts);
      lvl.padded = std::make_shared<field_ops::PaddedMatrix>(lvl.A);
      if (b >= 2) {
        lvl.Ahat = hat_matrix(lvl.A, lvl.chi);
        double margin = min_margin(lvl.Ahat);
        if (margin <= 0.0)
          throw Error("CoefficientLadder: homogenized coefficient lost ellipticity");
        cur = lvl.Ahat;
        levels_.push_back(std::move(lvl));
        --b;
      } else {
        constant_ = hat_matrix_constant(lvl.A, lvl.chi);
        levels_.push_back(std::move(lvl));
        break;
      }
    }
  }

  /// Level for a coefficient on `blocks` blocks (levels_[0] has the most).
  const Level& level(int blocks) const { return levels_.at(levels_[0].blocks - blocks); }
  int top_blocks() const { return levels_[0].blocks; }

  /// Fully homogenized constant matrix (the classical reiterated matrix when
  /// the ladder was built with exact tau = 0 correctors).
  const Mat& constant_matrix() const { return constant_; }

  static double min_margin(const TorusField& M) {
    double best = std::numeric_limits<double>::infinity();
    const int d = M.grid().d;
    for (std::size_t p = 0; p < M.npoints(); ++p) {
      Mat m(d);
      for (int i = 0; i < d * d; ++i) m.a[i] = M.value(i, p);
      best = std::min(best, ellipticity_margin(m));
    }
    return best;
  }

 private:
  std::vector<Level> levels_;
  Mat constant_;
};

/// Pieces of the truncated two-scale expansion at one level: the leading term
/// lives on the outer blocks; order-k terms split into an oscillating part
/// (zero inner mean) and a regular part independent of the inner block.
struct ExpansionPieces {
  TorusField leading;                 // on b-1 blocks
  std::vector<TorusField> osc;        // osc[k], k >= 1, on b blocks
  std::vector<TorusField> reg;        // reg[k], k >= 1, on b-1 blocks
  std::vector<TorusField> osc_core;   // intermediate inner solves, index k >= 2
};

struct DegenerateResult {
  TorusField Y;                 // truncated solution on b blocks
  double defect_l2 = 0.0;       // L2 norm of the truncation defect at this level
  double child_defect_l2 = 0.0; // accumulated weighted defects of reduced solves
  double residual_l2 = 0.0;     // independent residual of the assembled solution
  std::shared_ptr<ExpansionPieces> pieces;
  int max_iterations = 0;
  double worst_cell_residual = 0.0;
};

struct DegenerateOptions {
  CellSolveOptions cell;
  bool keep_pieces = false;
  bool compute_residual = false;
};

namespace corrector_detail {

inline TorusField chi_vector(const CoefficientLadder::Level& lvl) {
  const GridSpec& g = lvl.A.grid();
  TorusField out(g, 1);
  for (int m = 0; m < g.d; ++m) {
    auto src = lvl.chi[m].comp(0);
    auto dst = out.comp(m);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return out;
}

}  // namespace corrector_detail

/// Solve -hat_grad_b . (A hat_grad_b Y) + tau^2 Y = hat_grad_b . F on the
/// b-block torus by the truncated two-scale expansion in the smallest scale
/// ratio, recursing on the number of blocks. The single-block case is a
/// nondegenerate cell solve.
inline DegenerateResult solve_degenerate(const CoefficientLadder& ladder, int blocks,
                                         const TorusField& F, const std::vector<double>& deltas,
                                         double tau, const TruncationPlan& plan,
                                         const DegenerateOptions& opts = {}) {
  const auto& lvl = ladder.level(blocks);
  const TorusField& A = lvl.A;
  const GridSpec& g = A.grid();
  require(F.grid() == g && F.order() == 1, "solve_degenerate: F must be a vector field on A's grid");
  DegenerateResult out;

  if (blocks == 1) {
    CellProblem p{&A, &F, nullptr, tau};
    auto [Y, diag] = solve_inner(p, opts.cell);
    out.Y = std::move(Y);
    out.max_iterations = *std::max_element(diag.iterations.begin(), diag.iterations.end());
    out.worst_cell_residual = diag.max_rel_residual;
    if (opts.compute_residual) {
      CellProblem pr{&A, &F, nullptr, tau};
      out.residual_l2 = residual_inner(pr, out.Y, opts.cell.dealias);
    }
    return out;
  }

  const int inner_block = blocks - 1;
  const double dn = deltas[inner_block];
  const int K = plan.k_for_block(inner_block);
  const field_ops::PaddedMatrix& PA = *lvl.padded;
  const TorusField chi_vec = corrector_detail::chi_vector(lvl);
  const double tau2 = tau * tau;

  auto track = [&out](const SolveDiagnostics& d) {
    out.max_iterations =
        std::max(out.max_iterations, *std::max_element(d.iterations.begin(), d.iterations.end()));
    out.worst_cell_residual = std::max(out.worst_cell_residual, d.max_rel_residual);
  };

  DegenerateOptions child = opts;
  child.keep_pieces = false;
  child.compute_residual = false;

  auto reduce = [&](const TorusField& rhs_vec) {
    DegenerateResult r =
        solve_degenerate(ladder, blocks - 1, rhs_vec, deltas, tau, plan, child);
    out.child_defect_l2 += r.defect_l2 + r.child_defect_l2;
    out.max_iterations = std::max(out.max_iterations, r.max_iterations);
    out.worst_cell_residual = std::max(out.worst_cell_residual, r.worst_cell_residual);
    return r.Y;
  };

  // Inner response to F and the downscaled source.
  TorusField f_tilde;
  {
    CellProblem p{&A, &F, nullptr, 0.0};
    auto [Y, diag] = solve_inner(p, opts.cell);
    track(diag);
    f_tilde = std::move(Y);
  }
  TorusField f_hat = field_ops::inner_average(
      F + PA.matvec(field_ops::scale_partial(f_tilde, inner_block, 1)));

  // Leading term on the outer blocks.
  TorusField leading = reduce(f_hat);
  TorusField leading_lift = field_ops::lift_inner(leading, g);
  TorusField grad_leading =
      field_ops::lift_inner(field_ops::directional_gradient(leading, deltas, blocks - 1), g);

  // Order-1 oscillating part.
  TorusField osc1 = f_tilde + field_ops::dot_dealiased(chi_vec, grad_leading);

  std::vector<TorusField> osc(K + 1), reg(K + 1), osc_core(K + 2);
  osc[1] = std::move(osc1);

  auto solve_core = [&](const TorusField& osc_prev, const TorusField& full_prev,
                        bool with_F) -> TorusField {
    // -div_n(A grad_n core) = [hat_div F] + hat_div(A grad_n osc_prev)
    //                         + div_n(A hat_grad osc_prev)
    //                         + hat_div(A hat_grad full_prev) - tau^2 full_prev
    TorusField grad_n_osc = field_ops::scale_partial(osc_prev, inner_block, 1);
    TorusField gcell = field_ops::directional_divergence(PA.matvec(grad_n_osc), deltas, blocks - 1);
    TorusField f_cell =
        PA.matvec(field_ops::directional_gradient(osc_prev, deltas, blocks - 1));
    TorusField grad_full = field_ops::directional_gradient(full_prev, deltas, blocks - 1);
    gcell += field_ops::directional_divergence(PA.matvec(grad_full), deltas, blocks - 1);
    gcell -= tau2 * full_prev;
    if (with_F) gcell += field_ops::directional_divergence(F, deltas, blocks - 1);
    CellSolveOptions copts = opts.cell;
    copts.project_inner_mean = true;  // solvability holds analytically; kill solver roundoff
    CellProblem p{&A, &f_cell, &gcell, 0.0};
    auto [Y, diag] = solve_inner(p, copts);
    track(diag);
    return std::move(Y);
  };

  auto reduced_rhs = [&](const TorusField& core_next, const TorusField& osc_cur) {
    TorusField r = field_ops::inner_average(
        PA.matvec(field_ops::scale_partial(core_next, inner_block, 1)));
    r += field_ops::inner_average(
        PA.matvec(field_ops::directional_gradient(osc_cur, deltas, blocks - 1)));
    return r;
  };

  // Order-2 core and order-1 regular part.
  osc_core[2] = solve_core(osc[1], leading_lift, true);
  if (K >= 2) reg[1] = reduce(reduced_rhs(osc_core[2], osc[1]));

  auto full_term = [&](int j) -> TorusField {
    if (j == 0) return leading_lift;
    TorusField t = osc[j];
    if (j < K) t += field_ops::lift_inner(reg[j], g);
    return t;
  };

  for (int k = 1; k + 1 <= K; ++k) {
    TorusField grad_reg =
        field_ops::lift_inner(field_ops::directional_gradient(reg[k], deltas, blocks - 1), g);
    osc[k + 1] = osc_core[k + 1] + field_ops::dot_dealiased(chi_vec, grad_reg);
    if (k + 1 < K) {
      osc_core[k + 2] = solve_core(osc[k + 1], full_term(k), false);
      reg[k + 1] = reduce(reduced_rhs(osc_core[k + 2], osc[k + 1]));
    }
  }

  // Assemble the truncated sum.
  TorusField N = leading_lift;
  double w = 1.0;
  for (int j = 1; j < K; ++j) {
    w *= dn;
    N += w * (osc[j] + field_ops::lift_inner(reg[j], g));
  }
  N += (w * dn) * osc[K];

  // Truncation defect, evaluated directly from the last two terms.
  {
    TorusField yk = osc[K];
    TorusField ykm1 = full_term(K - 1);
    auto l_cross = [&](const TorusField& u) {
      // (L_xy + L_yx) u = -hat_div(A grad_n u) - div_n(A hat_grad u)
      TorusField t = field_ops::directional_divergence(
          PA.matvec(field_ops::scale_partial(u, inner_block, 1)), deltas, blocks - 1);
      t += field_ops::block_divergence(
          PA.matvec(field_ops::directional_gradient(u, deltas, blocks - 1)), inner_block);
      return -1.0 * t;
    };
    auto l_outer = [&](const TorusField& u) {
      TorusField t = field_ops::directional_divergence(
          PA.matvec(field_ops::directional_gradient(u, deltas, blocks - 1)), deltas, blocks - 1);
      return -1.0 * t;
    };
    double wk = std::pow(dn, K - 1);
    TorusField E = wk * (l_cross(yk) + l_outer(ykm1) + tau2 * ykm1);
    E += (wk * dn) * (l_outer(yk) + tau2 * yk);
    out.defect_l2 = field_ops::l2_norm(E);
  }

  if (opts.compute_residual) {
    TorusField flux = PA.matvec(field_ops::directional_gradient(N, deltas, blocks));
    TorusField r = -1.0 * field_ops::directional_divergence(flux, deltas, blocks);
    r += tau2 * N;
    r -= field_ops::directional_divergence(F, deltas, blocks);
    out.residual_l2 = field_ops::l2_norm(r);
  }

  if (opts.keep_pieces) {
    auto pieces = std::make_shared<ExpansionPieces>();
    pieces->leading = leading;
    pieces->osc.assign(osc.begin() + 1, osc.begin() + K + 1);
    pieces->reg.assign(reg.begin() + 1, reg.begin() + K);
    for (int k = 2; k <= K && k < static_cast<int>(osc_core.size()); ++k)
      if (osc_core[k].npoints() > 0) pieces->osc_core.push_back(osc_core[k]);
    out.pieces = std::move(pieces);
  }
  out.Y = std::move(N);
  return out;
}

/// Multiscale correctors for every direction plus residual diagnostics.
struct CorrectorSet {
  GridSpec grid;
  std::vector<double> deltas;
  double tau = 0.0;
  TruncationPlan plan;
  std::vector<TorusField> X;              // one scalar field per direction
  std::vector<DegenerateResult> detail;   // pieces and defects per direction
  std::vector<double> sup_norm;           // sup |X_j|
  std::vector<double> mean;               // <X_j>, should vanish
};

/// Build the corrector set for a sampled coefficient. Refuses when the plan
/// marks any gap as non-separated; n = 1 degenerates to a single regularized
/// cell solve.
inline CorrectorSet build_corrector(const CoefficientLadder& ladder, const ScaleVector& scales,
                                    const TruncationPlan& plan,
                                    const DegenerateOptions& opts_in = {}) {
  const auto& top = ladder.level(ladder.top_blocks());
  const TorusField& A = top.A;
  const GridSpec& g = A.grid();
  require(g.n == scales.n(), "build_corrector: scale count must match the grid");
  if (!plan.all_separated())
    throw ValidationError("build_corrector: scale-separation violated:" +
                          plan.violation_summary());

  CorrectorSet set;
  set.grid = g;
  set.deltas = scales.deltas;
  set.tau = plan.tau;
  set.plan = plan;
  DegenerateOptions opts = opts_in;
  opts.keep_pieces = true;
  opts.compute_residual = true;
  for (int j = 0; j < g.d; ++j) {
    TorusField Fj = field_ops::column(A, j);
    DegenerateResult r =
        solve_degenerate(ladder, g.n, Fj, scales.deltas, plan.tau, plan, opts);
    set.sup_norm.push_back(field_ops::linf_norm(r.Y));
    set.mean.push_back(field_ops::full_average(r.Y)[0]);
    set.X.push_back(r.Y);
    set.detail.push_back(std::move(r));
  }
  return set;
}

inline CorrectorSet build_corrector(const TorusField& A, const ScaleVector& scales,
                                    const TruncationPlan& plan,
                                    const DegenerateOptions& opts = {}) {
  CoefficientLadder ladder(A, opts.cell);
  return build_corrector(ladder, scales, plan, opts);
}

struct CorrectorCertificates {
  std::vector<double> sup_norm;   // per direction
  double energy = 0.0;            // sum_j ( |hat_grad X_j|_L2 + tau |X_j|_L2 )
  double max_defect = 0.0;        // worst truncation defect
  double max_residual = 0.0;      // worst assembled-equation residual
  bool uniform_in_tau = true;     // filled by the tau-sweep helper
  double sup_variation = 0.0;     // relative spread of sup|X| across the sweep
};

/// Certificates of the built set: sup norms, the energy quantity
/// |hat_grad X| + tau |X| and the final residuals.
inline CorrectorCertificates corrector_certificates(const CorrectorSet& set) {
  CorrectorCertificates cert;
  cert.sup_norm = set.sup_norm;
  for (std::size_t j = 0; j < set.X.size(); ++j) {
    TorusField grad =
        field_ops::directional_gradient(set.X[j], set.deltas, set.grid.n);
    cert.energy += field_ops::l2_norm(grad) + set.tau * field_ops::l2_norm(set.X[j]);
    cert.max_defect = std::max(cert.max_defect, set.detail[j].defect_l2);
    cert.max_residual = std::max(cert.max_residual, set.detail[j].residual_l2);
  }
  return cert;
}

/// Rebuild the correctors over a tau sweep at a fixed plan and flag sup-norm
/// blow-up: the spread must stay within `factor` of the coarsest-tau value.
inline CorrectorCertificates certify_tau_uniformity(const CoefficientLadder& ladder,
                                                    const ScaleVector& scales,
                                                    const TruncationPlan& base_plan,
                                                    const std::vector<double>& taus,
                                                    double factor = 1.5,
                                                    const DegenerateOptions& opts = {}) {
  require(!taus.empty(), "certify_tau_uniformity: need at least one tau");
  CorrectorCertificates cert;
  double ref = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    TruncationPlan plan = base_plan;
    plan.tau = taus[t];
    ScaleVector sc = scales;
    sc.tau = taus[t];
    CorrectorSet set = build_corrector(ladder, sc, plan, opts);
    double sup = 0.0;
    for (double s : set.sup_norm) sup += s;
    if (t == 0) {
      ref = sup;
      cert.sup_norm = set.sup_norm;
    }
    lo = std::min(lo, sup);
    hi = std::max(hi, sup);
  }
  cert.sup_variation = ref > 0.0 ? (hi - lo) / ref : 0.0;
  cert.uniform_in_tau = hi <= factor * ref;
  return cert;
}

}  // namespace homoscale

#endif  // HOMOSCALE_CORRECTOR_HPP
