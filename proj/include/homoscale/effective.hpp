#ifndef HOMOSCALE_EFFECTIVE_HPP
#define HOMOSCALE_EFFECTIVE_HPP

#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include "homoscale/corrector.hpp"

namespace homoscale {

/// Effective matrix Abar = < A + A hat_grad X > from a built corrector set.
inline Mat effective_matrix(const TorusField& A, const CorrectorSet& correctors) {
  const GridSpec& g = A.grid();
  const int d = g.d;
  field_ops::PaddedMatrix PA(A);
  Mat out(d);
  for (int j = 0; j < d; ++j) {
    TorusField flux =
        PA.matvec(field_ops::directional_gradient(correctors.X[j], correctors.deltas, g.n));
    flux += field_ops::column(A, j);
    auto avg = field_ops::full_average(flux);
    for (int i = 0; i < d; ++i) out(i, j) = avg[i];
  }
  if (ellipticity_margin(out) <= 0.0)
    throw Error("effective_matrix: produced matrix is not elliptic; corrector build is broken");
  return out;
}

/// Classical reiterated matrix: homogenize the innermost block with exact
/// (tau = 0) correctors, repeat until constant. The interim single-block
/// coefficient is returned as well (it seeds the tau-regularized variant).
struct ReiteratedResult {
  Mat A0;
  TorusField A1;  // interim coefficient with one block left (n >= 2 input)
};

inline ReiteratedResult reiterated_matrix(const TorusField& A, const CellSolveOptions& opts = {}) {
  CoefficientLadder ladder(A, opts);
  ReiteratedResult r;
  r.A0 = ladder.constant_matrix();
  r.A1 = ladder.level(1).A;
  return r;
}

inline ReiteratedResult reiterated_matrix(const CoefficientLadder& ladder) {
  return {ladder.constant_matrix(), ladder.level(1).A};
}

/// Regularized one-scale effective matrix: psi_tau solves the corrector
/// problem with the tau^2 zero-order term, A_tau = < A1 + A1 grad psi_tau >.
inline Mat tau_matrix(const TorusField& A1, double tau, const CellSolveOptions& opts = {}) {
  require(A1.grid().n == 1, "tau_matrix: single-block interim coefficient expected");
  const int d = A1.grid().d;
  field_ops::PaddedMatrix PA(A1);
  Mat out(d);
  for (int j = 0; j < d; ++j) {
    TorusField Fj = field_ops::column(A1, j);
    CellProblem p{&A1, &Fj, nullptr, tau};
    auto [psi, diag] = solve_inner(p, opts);
    TorusField flux = PA.matvec(field_ops::scale_partial(psi, 0, 1));
    flux += Fj;
    auto avg = field_ops::full_average(flux);
    for (int i = 0; i < d; ++i) out(i, j) = avg[i];
  }
  return out;
}

/// Ellipticity margin over random unit directions (the certified check used
/// for every produced matrix).
inline double random_direction_margin(const Mat& m, int samples = 1000, unsigned seed = 12345) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  for (int s = 0; s < samples; ++s) {
    std::array<double, 2> xi{1.0, 0.0};
    if (m.d == 2) {
      double a = gauss(rng), b = gauss(rng);
      double nrm = std::sqrt(a * a + b * b);
      if (nrm == 0.0) continue;
      xi = {a / nrm, b / nrm};
    }
    auto Axi = m.apply(xi);
    double q = 0.0;
    for (int i = 0; i < m.d; ++i) q += xi[i] * Axi[i];
    worst = std::min(worst, q);
  }
  return worst;
}

/// The three effective matrices, their gaps and the predicted bound shape.
struct EffectiveReport {
  Mat Abar;
  Mat A0;
  Mat Atau;
  double gap_bar_0_max = 0.0;     // componentwise max |A0 - Abar|
  double gap_bar_0_sum = 0.0;     // tensor-sum norm |A0 - Abar|
  double gap_tau_0_sum = 0.0;     // tensor-sum norm |A0 - Atau|
  double predicted_bound = 0.0;   // tau^2 + sum of consecutive delta ratios
  double margin_Abar = 0.0;
  double margin_A0 = 0.0;
  double margin_Atau = 0.0;
  double tau = 0.0;
  std::vector<int> k_used;
};

inline EffectiveReport gap_report(const TorusField& A, const ScaleVector& scales,
                                  const TruncationPlan& plan, const DegenerateOptions& opts = {}) {
  EffectiveReport rep;
  CoefficientLadder ladder(A, opts.cell);
  CorrectorSet set = build_corrector(ladder, scales, plan, opts);
  rep.Abar = effective_matrix(A, set);
  auto reit = reiterated_matrix(ladder);
  rep.A0 = reit.A0;
  rep.Atau = A.grid().n >= 2 ? tau_matrix(reit.A1, plan.tau, opts.cell) : rep.A0;
  Mat gap = rep.A0 - rep.Abar;
  rep.gap_bar_0_max = gap.max_abs();
  rep.gap_bar_0_sum = gap.abs_sum();
  rep.gap_tau_0_sum = (rep.A0 - rep.Atau).abs_sum();
  rep.predicted_bound = plan.tau * plan.tau;
  for (int i = 1; i < scales.n(); ++i)
    rep.predicted_bound += scales.deltas[i] / scales.deltas[i - 1];
  rep.margin_Abar = random_direction_margin(rep.Abar);
  rep.margin_A0 = random_direction_margin(rep.A0);
  rep.margin_Atau = random_direction_margin(rep.Atau);
  rep.tau = plan.tau;
  for (const auto& gpc : plan.gaps) rep.k_used.push_back(gpc.k);
  return rep;
}

/// Paired comparison behind the gap-report flag: when the predicted bound
/// shrinks by at least (almost) a factor 2, the measured gap must not grow.
inline bool gap_pair_consistent(const EffectiveReport& coarse, const EffectiveReport& fine,
                                double factor = 2.0) {
  if (coarse.predicted_bound >= factor * fine.predicted_bound * (1.0 - 1e-9))
    return fine.gap_bar_0_sum <= coarse.gap_bar_0_sum + 1e-15;
  return true;
}

inline nlohmann::json effective_report_json(const EffectiveReport& rep) {
  auto mat = [](const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.d; ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int j = 0; j < m.d; ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  nlohmann::json j;
  j["Abar"] = mat(rep.Abar);
  j["A0"] = mat(rep.A0);
  j["Atau"] = mat(rep.Atau);
  j["gap_bar_0_max"] = rep.gap_bar_0_max;
  j["gap_bar_0_sum"] = rep.gap_bar_0_sum;
  j["gap_tau_0_sum"] = rep.gap_tau_0_sum;
  j["predicted_bound"] = rep.predicted_bound;
  j["ellipticity_margin"] = {
      {"Abar", rep.margin_Abar}, {"A0", rep.margin_A0}, {"Atau", rep.margin_Atau}};
  j["tau"] = rep.tau;
  j["k"] = rep.k_used;
  return j;
}

}  // namespace homoscale

#endif  // HOMOSCALE_EFFECTIVE_HPP
