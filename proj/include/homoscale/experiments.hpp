#ifndef HOMOSCALE_EXPERIMENTS_HPP
#define HOMOSCALE_EXPERIMENTS_HPP

#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "homoscale/bvp.hpp"
#include "homoscale/pipeline.hpp"
#include "homoscale/quadrature.hpp"
#include "homoscale/snapshot.hpp"

namespace homoscale {

/// The named desk studies. Each experiment computes its own pass/fail verdict
/// against thresholds pinned from the acceptance criteria and writes CSV
/// tables (schema-versioned) plus a JSON summary embedding the full config.
namespace experiments {

constexpr const char* kCsvSchema = "# homoscale-csv/1";

struct ExperimentResult {
  std::string name;
  bool pass = false;
  nlohmann::json summary;
};

namespace detail {

inline void write_csv(const std::string& path, const std::string& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  require(out.good(), "experiment: cannot open " + path);
  out << kCsvSchema << "\n" << header << "\n";
  out.precision(16);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

inline void write_summary(const std::string& dir, const ExperimentResult& res,
                          const nlohmann::json& config) {
  nlohmann::json j = res.summary;
  j["experiment"] = res.name;
  j["pass"] = res.pass;
  j["config"] = config;
  std::ofstream out(dir + "/" + res.name + ".json");
  out << j.dump(2) << "\n";
}

inline TorusField sample_scalar_coefficient(
    const GridSpec& g, const std::function<double(const std::vector<double>&)>& a) {
  TorusField out(g, 2);
  std::vector<double> y(g.axes());
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    for (int ax = 0; ax < g.axes(); ++ax) y[ax] = g.coord(p, ax);
    double v = a(y);
    for (int i = 0; i < g.d; ++i) out.value(i * g.d + i, p) = v;
  }
  return out;
}

}  // namespace detail

/// Classical single-scale baseline: a = 3 + sin(2 pi y), L2 rate slope 1.
inline ExperimentResult rate_1d(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  ExperimentResult res;
  res.name = "rate_1d";
  auto aval = [](double y) { return 3.0 + std::sin(2 * kPi * y); };

  GridSpec g(1, 1, 64);
  TorusField A = detail::sample_scalar_coefficient(g, [&](const std::vector<double>& y) {
    return aval(y[0]);
  });
  auto ladder = CoefficientLadder(A);
  const double abar = ladder.constant_matrix()(0, 0);
  auto u0 = solve_effective_1d(abar, 1.0, 0.0, 0.0);

  std::vector<double> epss = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  std::vector<std::vector<double>> rows;
  std::vector<double> errs;
  for (double eps : epss) {
    auto u_eps = solve_fine_1d([&](double x) { return aval(x / eps); }, 1.0, 0.0, 0.0, eps);
    double l2 =
        quad::l2_norm([&](double x) { return u_eps(x) - u0(x); }, 0.0, 1.0, u_eps.panels());
    errs.push_back(l2);
    rows.push_back({eps, l2, 0.0, 0.0});
  }
  auto fit = fit_power_law(epss, errs);
  res.pass = fit.slope >= 0.85 && fit.slope <= 1.15;
  res.summary = {{"slope", fit.slope},
                 {"prefactor", fit.prefactor},
                 {"r_squared", fit.r_squared},
                 {"abar", abar},
                 {"threshold", "slope in [0.85, 1.15]"}};
  detail::write_csv(outdir + "/rate_1d.csv", "eps1,l2_error,h1_w,tau", rows);
  return res;
}

/// Single-scale 2-D rate study (companion to the 1-D baseline).
inline ExperimentResult rate_2d(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  ExperimentResult res;
  res.name = "rate_2d";
  auto aval = [](double y1, double y2) {
    return 2.0 + 0.8 * std::sin(2 * kPi * y1) * std::cos(2 * kPi * y2);
  };
  GridSpec g(2, 1, 32);
  TorusField A = detail::sample_scalar_coefficient(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1]);
  });
  CoefficientLadder ladder(A);
  Mat abar = ladder.constant_matrix();

  auto f = [](double, double) { return 1.0; };
  auto gb = [](double, double) { return 0.0; };
  std::vector<double> epss = {1.0 / 4, 1.0 / 8, 1.0 / 16};
  std::vector<double> errs;
  std::vector<std::vector<double>> rows;
  for (double eps : epss) {
    int N = static_cast<int>(std::lround(16.0 / eps));
    auto Af = [&](double x, double y) { return Mat::scalar(2, aval(x / eps, y / eps)); };
    auto fine = solve_fine_2d(Af, f, gb, N, eps);
    auto eff = solve_effective_2d(abar, f, gb, N);
    double h = 1.0 / N;
    double acc = 0.0;
    for (std::size_t i = 0; i < fine.u.size(); ++i) {
      double dv = fine.u[i] - eff.u[i];
      acc += dv * dv * h * h;
    }
    errs.push_back(std::sqrt(acc));
    rows.push_back({eps, errs.back()});
  }
  auto fit = fit_power_law(epss, errs);
  res.pass = fit.slope >= 0.7 && fit.slope <= 1.3;
  res.summary = {{"slope", fit.slope},
                 {"abar00", abar(0, 0)},
                 {"abar01", abar(0, 1)},
                 {"threshold", "slope in [0.7, 1.3]"}};
  detail::write_csv(outdir + "/rate_2d.csv", "eps1,l2_error", rows);
  return res;
}

/// Non-separated counterexample: almost-resonant scales converge to an
/// x-dependent effective equation at rate O(eps) while no constant-coefficient
/// solution gets closer.
inline ExperimentResult counterexample_nonseparated(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  ExperimentResult res;
  res.name = "counterexample_nonseparated";
  const double alpha = 0.25;

  std::vector<double> epss = {1e-2, 1e-3, 1e-4};
  std::vector<double> errs_x, errs_const;
  std::vector<std::vector<double>> rows;
  for (double eps : epss) {
    const double e1 = eps, e2 = eps / (1.0 + eps);
    auto a_eps = [&](double x) {
      return 1.0 / (1.0 + 2.0 * alpha * std::sin(2 * kPi * x / e1) * std::sin(2 * kPi * x / e2));
    };
    const double e3 = eps / (2.0 + eps);
    auto u_eps = solve_fine_1d(a_eps, 1.0, 0.0, 0.0, e3);

    // x-dependent effective solution: -(abar(x) u')' = 1 with
    // abar(x) = 1 / (1 + alpha cos(2 pi x)); u' = -(x + C)(1 + alpha cos).
    auto inv_abar = [&](double x) { return 1.0 + alpha * std::cos(2 * kPi * x); };
    auto ubar = solve_fine_1d([&](double x) { return 1.0 / inv_abar(x); }, 1.0, 0.0, 0.0, 0.2,
                              512);
    double err_x =
        quad::l2_norm([&](double x) { return u_eps(x) - ubar(x); }, 0.0, 1.0, u_eps.panels());

    // Distance to the best constant-coefficient solution k x (1 - x).
    auto q = [](double x) { return x * (1.0 - x); };
    int panels = u_eps.panels();
    double uq = quad::integrate([&](double x) { return u_eps(x) * q(x); }, 0.0, 1.0, panels);
    double qq = quad::integrate([&](double x) { return q(x) * q(x); }, 0.0, 1.0, panels);
    double uu = quad::integrate([&](double x) { return u_eps(x) * u_eps(x); }, 0.0, 1.0, panels);
    double kbest = std::max(0.0, uq / qq);
    double err_c = std::sqrt(std::max(0.0, uu - 2 * kbest * uq + kbest * kbest * qq));

    errs_x.push_back(err_x);
    errs_const.push_back(err_c);
    rows.push_back({eps, err_x, err_c});
  }
  auto fit = fit_power_law(epss, errs_x);
  double cmin = *std::min_element(errs_const.begin(), errs_const.end());
  double cmax = *std::max_element(errs_const.begin(), errs_const.end());
  bool slope_ok = fit.slope >= 0.85 && fit.slope <= 1.15;
  bool flat_ok = (cmax - cmin) <= 0.10 * cmax;
  res.pass = slope_ok && flat_ok;
  res.summary = {{"slope_vs_x_dependent", fit.slope},
                 {"const_distance_min", cmin},
                 {"const_distance_max", cmax},
                 {"const_distance_spread", (cmax - cmin) / cmax},
                 {"threshold", "slope in [0.85,1.15]; constant-coefficient distance spread < 10%"}};
  detail::write_csv(outdir + "/counterexample_nonseparated.csv",
                    "eps,l2_error_vs_xdependent,l2_distance_best_constant", rows);
  return res;
}

/// Resonant-beta counterexample: the distance to every constant-coefficient
/// solution stays above the closed-form projection bound.
inline ExperimentResult counterexample_exponential(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  ExperimentResult res;
  res.name = "counterexample_exponential";
  const int beta0 = 6;
  const double eps = 1e-4;
  const double beta = beta0 + eps;
  double amp = 1.0;  // beta0! / beta0^beta0
  for (int k = 2; k <= beta0; ++k) amp *= static_cast<double>(k) / beta0;

  auto a_eps = [&](double x) {
    return 1.0 /
           (1.0 + amp * std::sin(beta0 * 2 * kPi * x / eps) * std::sin(beta * 2 * kPi * x / eps));
  };
  auto u_eps = solve_fine_1d(a_eps, 1.0, 0.0, 0.0, eps / beta);

  auto closed = [&](double x) {
    return 0.5 * x * (1.0 - x) -
           amp / (8 * kPi * kPi) *
               (kPi * (2 * x - 1) * std::sin(2 * kPi * x) + std::cos(2 * kPi * x) - 1.0);
  };
  double closed_dev = 0.0;
  for (int i = 1; i < 400; ++i) {
    double x = i / 400.0;
    closed_dev = std::max(closed_dev, std::abs(u_eps(x) - closed(x)));
  }

  // Projection oracle: c1 = (1 / 8 pi^2) * L2 distance of
  // phi = pi (2x+1) sin(2 pi x) + cos(2 pi x) - 1 from span{x(1-x)}.
  auto phi = [&](double x) {
    return kPi * (2 * x - 1) * std::sin(2 * kPi * x) + std::cos(2 * kPi * x) - 1.0;
  };
  auto q = [](double x) { return x * (1.0 - x); };
  const int pp = 2048;
  double pq = quad::integrate([&](double x) { return phi(x) * q(x); }, 0.0, 1.0, pp);
  double qq = quad::integrate([&](double x) { return q(x) * q(x); }, 0.0, 1.0, pp);
  double ppn = quad::integrate([&](double x) { return phi(x) * phi(x); }, 0.0, 1.0, pp);
  double kproj = pq / qq;
  double c1 = std::sqrt(std::max(0.0, ppn - 2 * kproj * pq + kproj * kproj * qq)) /
              (8 * kPi * kPi);

  // Measured distance of u_eps to the ray {x(1-x)/(2 abar) : abar > 0}.
  int panels = u_eps.panels();
  double uq = quad::integrate([&](double x) { return u_eps(x) * q(x); }, 0.0, 1.0, panels);
  double uu = quad::integrate([&](double x) { return u_eps(x) * u_eps(x); }, 0.0, 1.0, panels);
  double kbest = std::max(0.0, uq / qq);
  double dist = std::sqrt(std::max(0.0, uu - 2 * kbest * uq + kbest * kbest * qq));

  double bound = 0.5 * c1 * amp;
  bool closed_ok = closed_dev <= 10.0 * eps;
  bool dist_ok = dist >= bound;
  res.pass = closed_ok && dist_ok;
  res.summary = {{"closed_form_max_dev", closed_dev},
                 {"closed_form_tolerance", 10.0 * eps},
                 {"constant_distance", dist},
                 {"projection_bound", bound},
                 {"c1", c1},
                 {"amp_beta0", amp},
                 {"threshold", "closed-form match <= 10 eps; distance >= 0.5 c1 beta0!/beta0^beta0"}};
  detail::write_csv(outdir + "/counterexample_exponential.csv",
                    "beta0,eps,closed_form_max_dev,constant_distance,projection_bound",
                    {{static_cast<double>(beta0), eps, closed_dev, dist, bound}});
  return res;
}

/// Toy averaging study: the single-mode bound check plus the exponential-tail
/// regression with an analytic multi-mode envelope.
inline ExperimentResult toy_averaging_study(const std::string& outdir) {
  ExperimentResult res;
  res.name = "toy_averaging";
  const double eps = 1e-3;

  // Part 1: single-mode f and g; one-constant calibration of the bound
  // rho <= C (beta eps + e^{-beta/2}) and a factor-2 envelope check.
  TrigPoly fs{0.0, {{1, 0.0, 1.0}}};
  TrigPoly gs{0.0, {{1, 0.0, 1.0}}};
  std::vector<double> betas;
  for (int b = 4; b <= 16; b += 2) betas.push_back(b + eps);  // offset dodges exact resonance
  std::vector<double> rhos, envelopes;
  std::vector<std::vector<double>> rows;
  for (double beta : betas) {
    double rho = toy_averaging(fs, gs, eps, beta);
    double env = beta * eps + std::exp(-0.5 * beta);
    rhos.push_back(rho);
    envelopes.push_back(env);
    rows.push_back({beta, rho, env});
  }
  // One-constant calibration: the smallest C with rho <= C (beta eps +
  // e^{-beta/2}) over the sweep. The check is that C stays moderate (the
  // envelope shape is right) and every point sits inside the factor-2 band.
  double c_cal = 0.0;
  for (std::size_t i = 0; i < rhos.size(); ++i)
    c_cal = std::max(c_cal, rhos[i] / envelopes[i]);
  bool bound_ok = c_cal > 0.0 && c_cal <= 5.0;
  for (std::size_t i = 0; i < rhos.size(); ++i)
    if (rhos[i] > 2.0 * c_cal * envelopes[i]) bound_ok = false;

  // Part 2: analytic f with a geometric mode tail; the resonant content at
  // j ~ beta drives rho ~ e^{-beta/2} in the exponential regime.
  TrigPoly fa{1.0, {}};
  for (int k = 1; k <= 24; ++k) fa.terms.push_back({k, std::exp(-0.5 * k), 0.0});
  std::vector<double> reg_betas, reg_rhos;
  std::vector<std::vector<double>> rows2;
  for (double beta : betas) {
    double rho = toy_averaging(fa, gs, eps, beta);
    rows2.push_back({beta, rho});
    if (std::exp(-0.5 * beta) >= beta * eps && rho > 1e-14) {
      reg_betas.push_back(beta);
      reg_rhos.push_back(rho);
    }
  }
  bool reg_ok = false;
  double slope = 0.0, r2 = 0.0;
  if (reg_betas.size() >= 3) {
    auto fit = fit_exponential(reg_betas, reg_rhos);
    slope = fit.slope;
    r2 = fit.r_squared;
    reg_ok = slope < 0.0 && r2 >= 0.9;
  }

  // Cross-check the exact modewise evaluation against adaptive quadrature.
  double beta_chk = 7.5;
  double rho_exact = toy_averaging(fs, gs, eps, beta_chk);
  double cycles = (1.0 / beta_chk + 1.0) / eps;
  int panels = static_cast<int>(std::ceil(8.0 * cycles));
  double integral = quad::integrate(
      [&](double x) { return fs(x / (beta_chk * eps)) * gs(x / eps); }, 0.0, 1.0, panels);
  double rho_quad = std::abs(integral - fs.mean * gs.mean);
  bool quad_ok = std::abs(rho_exact - rho_quad) <= 1e-9;

  res.pass = bound_ok && reg_ok && quad_ok;
  res.summary = {{"calibrated_constant", c_cal},
                 {"bound_ok", bound_ok},
                 {"regression_slope", slope},
                 {"regression_r2", r2},
                 {"regression_points", reg_betas.size()},
                 {"quad_crosscheck_gap", std::abs(rho_exact - rho_quad)},
                 {"threshold",
                  "rho <= 2 C (beta eps + e^{-beta/2}); negative slope with R^2 >= 0.9; "
                  "modewise vs quadrature <= 1e-9"}};
  detail::write_csv(outdir + "/toy_averaging_single_mode.csv", "beta,rho,envelope", rows);
  detail::write_csv(outdir + "/toy_averaging_analytic.csv", "beta,rho", rows2);
  return res;
}

/// Gradient-boundedness probe: dyadic averaged-gradient ratios for the
/// two-scale fine solution. Trend report only, always passes.
inline ExperimentResult lipschitz_probe(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  ExperimentResult res;
  res.name = "lipschitz_probe";
  const double e1 = 1.0 / 32, e2 = e1 * e1;
  auto a_eps = [&](double x) {
    return 3.0 + std::sin(2 * kPi * x / e1) + std::sin(2 * kPi * x / e2);
  };
  auto u = solve_fine_1d(a_eps, 1.0, 0.0, 0.0, e2);
  const double x0 = 0.5;
  auto grad_sq_avg = [&](double r) {
    int panels = std::max(64, static_cast<int>(std::ceil(2.5 * 2 * r / e2)));
    double v = quad::integrate([&](double x) { return u.deriv(x) * u.deriv(x); }, x0 - r, x0 + r,
                               panels) /
               (2 * r);
    return std::sqrt(v);
  };
  double denom = std::sqrt(quad::integrate([&](double x) { return u.deriv(x) * u.deriv(x); },
                                           0.0, 1.0, u.panels()) +
                           1.0);
  std::vector<std::vector<double>> rows;
  double max_ratio = 0.0;
  for (double r = 0.5; r >= e2; r *= 0.5) {
    double ratio = grad_sq_avg(r) / denom;
    max_ratio = std::max(max_ratio, ratio);
    rows.push_back({r, ratio});
  }
  res.pass = true;
  res.summary = {{"max_dyadic_ratio", max_ratio}, {"threshold", "trend report only"}};
  detail::write_csv(outdir + "/lipschitz_probe.csv", "radius,gradient_ratio", rows);
  return res;
}

/// Dispatch by name; writes outputs under `outdir`. Resource or resolution
/// exhaustion inside a study yields a flagged partial report instead of an
/// exception; unknown names are validation errors.
inline ExperimentResult run_experiment(const std::string& name, const nlohmann::json& config,
                                       const std::string& outdir) {
  std::filesystem::create_directories(outdir);
  ExperimentResult res;
  try {
    if (name == "rate_1d") {
      res = rate_1d(outdir);
    } else if (name == "rate_2d") {
      res = rate_2d(outdir);
    } else if (name == "counterexample_nonseparated") {
      res = counterexample_nonseparated(outdir);
    } else if (name == "counterexample_exponential") {
      res = counterexample_exponential(outdir);
    } else if (name == "toy_averaging") {
      res = toy_averaging_study(outdir);
    } else if (name == "lipschitz_probe") {
      res = lipschitz_probe(outdir);
    } else {
      throw ValidationError("run_experiment: unknown experiment " + name);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    res.name = name;
    res.pass = false;
    res.summary = {{"partial", true}, {"error", e.what()}};
  }
  detail::write_summary(outdir, res, config);
  return res;
}

/// Calibration sweep of the separation constants against the supercell
/// oracle: for each (c_j, tau-constant) candidate, measure the worst
/// effective-matrix error over rational-ratio cases where the supercell
/// reference is exact.
inline nlohmann::json calibrate_supercell(const std::string& outdir) {
  constexpr double kPi = std::numbers::pi;
  std::filesystem::create_directories(outdir);
  auto aval = [](double y1, double y2) {
    return 3.0 + std::sin(2 * kPi * y1) + std::sin(2 * kPi * y2) +
           0.8 * std::sin(2 * kPi * y1) * std::sin(2 * kPi * y2);
  };
  GridSpec g(1, 2, 64);
  TorusField A = detail::sample_scalar_coefficient(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1]);
  });
  CoefficientLadder ladder(A);

  nlohmann::json table = nlohmann::json::array();
  std::vector<std::vector<double>> rows;
  double best_err = 1e300, best_cj = 0.0, best_c = 0.0;
  for (double cj : {0.1, 0.15, 0.2}) {
    for (double c : {0.25, 0.5, 1.0}) {
      double worst = 0.0;
      int admitted = 0;
      for (int q : {8, 16, 32}) {
        ScaleVector scales({0.5, 0.5 / q});
        PlanConfig cfg;
        cfg.default_gap_constant = cj;
        cfg.tau_constant = c;
        auto plan = choose_parameters(scales, cfg);
        if (!plan.all_separated()) continue;
        ++admitted;
        CorrectorSet set = build_corrector(ladder, scales, plan);
        Mat abar = effective_matrix(A, set);
        double super = 1.0 / quad::integrate(
                                 [&](double t) { return 1.0 / aval(t, q * t); }, 0.0, 1.0, 4096);
        worst = std::max(worst, std::abs(abar(0, 0) - super));
      }
      nlohmann::json entry = {{"c_j", cj},
                              {"tau_constant", c},
                              {"admitted_cases", admitted},
                              {"worst_supercell_error", worst}};
      table.push_back(entry);
      rows.push_back({cj, c, static_cast<double>(admitted), worst});
      if (admitted == 3 && worst < best_err) {
        best_err = worst;
        best_cj = cj;
        best_c = c;
      }
    }
  }
  nlohmann::json out = {{"table", table},
                        {"recommended", {{"c_j", best_cj}, {"tau_constant", best_c}}},
                        {"worst_error_at_recommended", best_err}};
  detail::write_csv(outdir + "/calibrate.csv", "c_j,tau_constant,admitted,worst_supercell_error",
                    rows);
  std::ofstream js(outdir + "/calibrate.json");
  js << out.dump(2) << "\n";
  return out;
}

}  // namespace experiments

}  // namespace homoscale

#endif  // HOMOSCALE_EXPERIMENTS_HPP
