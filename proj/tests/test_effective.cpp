#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homoscale/effective.hpp"

#include "oracles.hpp"

using namespace homoscale;
namespace fo = homoscale::field_ops;

namespace {
constexpr double kPi = std::numbers::pi;

TorusField scalar_matrix_field(const GridSpec& g,
                               const std::function<double(const std::vector<double>&)>& a) {
  TorusField out(g, 2);
  std::vector<double> y(g.axes());
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    for (int ax = 0; ax < g.axes(); ++ax) y[ax] = g.coord(p, ax);
    double v = a(y);
    for (int i = 0; i < g.d; ++i) out.value(i * g.d + i, p) = v;
  }
  return out;
}

double a_two_scale(double y1, double y2) {
  return 3.0 + std::sin(2 * kPi * y1) + std::sin(2 * kPi * y2);
}

}  // namespace

TEST_CASE("constant coefficient: all three matrices coincide") {
  GridSpec g(1, 2, 16);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>&) { return 2.0; });
  ScaleVector scales({0.5, 0.05}, 1e-4);
  PlanConfig cfg;
  cfg.fixed_tau = 1e-4;
  auto plan = choose_parameters(scales, cfg);
  auto rep = gap_report(A, scales, plan);
  CHECK(rep.Abar(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(rep.A0(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(rep.Atau(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(rep.gap_bar_0_sum <= 1e-9);
}

TEST_CASE("1-D reiterated matrix is the full harmonic mean (quadrature oracle)") {
  GridSpec g(1, 2, 64);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return a_two_scale(y[0], y[1]);
  });
  auto r = reiterated_matrix(A);
  double want = oracles::harmonic_mean_2d([](double y1, double y2) {
    return a_two_scale(y1, y2);
  });
  CHECK(r.A0(0, 0) == doctest::Approx(want).epsilon(1e-8));
}

TEST_CASE("resonant reciprocal coefficient: A0 = 1 for any amplitude") {
  // a = 1 / (1 + 2 alpha sin sin): <1/a> factorizes and both sines average
  // out, so the full harmonic mean is exactly 1.
  const double alpha = 0.25;
  GridSpec g(1, 2, 64);
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
    return 1.0 / (1.0 + 2.0 * alpha * std::sin(2 * kPi * y[0]) * std::sin(2 * kPi * y[1]));
  });
  auto r = reiterated_matrix(A);
  CHECK(r.A0(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tau_matrix: limits and quadratic convergence") {
  GridSpec g(1, 1, 64);
  auto aval = [](double y) { return 3.0 + std::sin(2 * kPi * y); };
  TorusField A1 = scalar_matrix_field(g, [&](const std::vector<double>& y) { return aval(y[0]); });

  SUBCASE("tau = 0 reproduces the harmonic mean exactly") {
    Mat At = tau_matrix(A1, 0.0);
    CHECK(At(0, 0) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-10));
  }
  SUBCASE("constant coefficient is a fixed point for every tau") {
    TorusField C1 = scalar_matrix_field(g, [](const std::vector<double>&) { return 2.5; });
    for (double tau : {0.0, 0.1, 1.0}) {
      Mat At = tau_matrix(C1, tau);
      CHECK(At(0, 0) == doctest::Approx(2.5).epsilon(1e-12));
    }
  }
  SUBCASE("|A_tau - sqrt(8)| = O(tau^2): slope 2.0 +- 0.1 on log-log") {
    std::vector<double> taus = {1e-1, 1e-2, 1e-3};
    std::vector<double> lx, ly;
    for (double tau : taus) {
      Mat At = tau_matrix(A1, tau);
      double gap = std::abs(At(0, 0) - std::sqrt(8.0));
      REQUIRE(gap > 0.0);
      lx.push_back(std::log(tau));
      ly.push_back(std::log(gap));
    }
    double slope = oracles::ls_slope(lx, ly);
    CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("effective matrix against the double harmonic mean and the supercell") {
  GridSpec g(1, 2, 64);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return a_two_scale(y[0], y[1]);
  });
  const int q = 16;
  ScaleVector scales({0.5, 0.5 / q}, 1e-4);
  PlanConfig cfg;
  cfg.fixed_tau = 1e-4;
  cfg.fixed_k = 8;
  auto plan = choose_parameters(scales, cfg);
  CoefficientLadder ladder(A);
  CorrectorSet set = build_corrector(ladder, scales, plan);
  Mat Abar = effective_matrix(A, set);

  SUBCASE("within the predicted envelope of the double harmonic mean") {
    double a0 = oracles::harmonic_mean_2d([](double y1, double y2) {
      return a_two_scale(y1, y2);
    });
    double envelope = plan.tau * plan.tau + 1.0 / q;
    CHECK(std::abs(Abar(0, 0) - a0) <= 2.0 * envelope);
  }
  SUBCASE("matches the supercell homogenized coefficient") {
    // Harmonic mean of b(t) = a(t, q t) over one period (quadrature oracle).
    double super = oracles::harmonic_mean_1d(
        [&](double t) { return a_two_scale(t, q * t); }, 4096);
    CHECK(std::abs(Abar(0, 0) - super) <= 1e-3 + 10.0 * plan.tau * plan.tau);
  }
  SUBCASE("ellipticity margin at least lambda for random directions") {
    CHECK(random_direction_margin(Abar) >= 1.0 - 1e-9);  // a ranges in [1,5]
  }
}

TEST_CASE("A0 does not depend on the corrector tau") {
  GridSpec g(1, 2, 32);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return a_two_scale(y[0], y[1]);
  });
  auto r1 = reiterated_matrix(A);
  auto r2 = reiterated_matrix(A);  // rebuilt from scratch; tau never enters
  CHECK(r1.A0(0, 0) == doctest::Approx(r2.A0(0, 0)).epsilon(1e-12));
}

TEST_CASE("gap report: monotone shrink over a delta sweep with fixed tau") {
  // A coupled coefficient: purely additive ones make the 1-D gap collapse to
  // roundoff, while cross terms leave a resonance-driven gap inside the
  // C * delta2 envelope.
  auto aval = [](double y1, double y2) {
    return 3.0 + std::sin(2 * kPi * y1) + std::sin(2 * kPi * y2) +
           0.8 * std::sin(2 * kPi * y1) * std::sin(2 * kPi * y2);
  };
  PlanConfig cfg;
  cfg.fixed_tau = 1e-6;
  cfg.fixed_k = 8;
  cfg.default_gap_constant = 0.2;  // calibration that admits delta2 = 1/8
  std::vector<double> gaps;
  for (int q : {8, 16, 32}) {
    GridSpec g(1, 2, 64);
    TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
      return aval(y[0], y[1]);
    });
    ScaleVector scales({0.5, 0.5 / q}, 1e-6);
    auto plan = choose_parameters(scales, cfg);
    auto rep = gap_report(A, scales, plan);
    gaps.push_back(rep.gap_bar_0_sum);
    CHECK(rep.margin_Abar > 0.9);
    CHECK(rep.predicted_bound >= rep.tau * rep.tau);
  }
  CHECK(gaps[0] > gaps[1]);
  CHECK(gaps[1] > gaps[2]);
  // One fitted constant with factor-2 slack covers the sweep.
  double c_fit = gaps[0] * 8.0;
  CHECK(gaps[1] <= 2.0 * c_fit / 16.0);
  CHECK(gaps[2] <= 2.0 * c_fit / 32.0);
}

TEST_CASE("gap reports serialize to JSON and pair consistently") {
  GridSpec g(1, 2, 64);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return 3.0 + std::sin(2 * kPi * y[0]) + std::sin(2 * kPi * y[1]) +
           0.8 * std::sin(2 * kPi * y[0]) * std::sin(2 * kPi * y[1]);
  });
  PlanConfig cfg;
  cfg.default_gap_constant = 0.2;
  cfg.fixed_tau = 1e-6;
  cfg.fixed_k = 8;
  ScaleVector coarse_scales({0.5, 0.5 / 8}, 1e-6);
  ScaleVector fine_scales({0.5, 0.5 / 16}, 1e-6);
  auto coarse = gap_report(A, coarse_scales, choose_parameters(coarse_scales, cfg));
  auto fine = gap_report(A, fine_scales, choose_parameters(fine_scales, cfg));
  CHECK(coarse.predicted_bound >= 1.999 * fine.predicted_bound);
  CHECK(gap_pair_consistent(coarse, fine));

  auto j = effective_report_json(coarse);
  CHECK(j.contains("Abar"));
  CHECK(j.contains("A0"));
  CHECK(j.contains("Atau"));
  CHECK(j["gap_bar_0_sum"].get<double>() == doctest::Approx(coarse.gap_bar_0_sum));
  CHECK(j["ellipticity_margin"]["Abar"].get<double>() > 0.9);
}

TEST_CASE("2-D supercell oracle: Abar matches the one-scale reference") {
  // b(y) = a(y1, y2, q y1, q y2) is 1-periodic, so a plain one-scale build on
  // a finer grid is an exact reference for the two-scale construction.
  const int q = 4;
  auto aval = [](double y1, double y2, double z1, double z2) {
    return 2.0 + 0.4 * std::sin(2 * kPi * y1) * std::cos(2 * kPi * y2) +
           0.3 * std::sin(2 * kPi * z1) + 0.25 * std::cos(2 * kPi * z2);
  };
  GridSpec g(2, 2, 8);
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1], y[2], y[3]);
  });
  ScaleVector scales({0.5, 0.5 / q}, 1e-3);
  PlanConfig cfg;
  cfg.default_gap_constant = 0.5;  // q = 4 is a mild ratio; admit it for the oracle check
  cfg.fixed_tau = 1e-3;
  cfg.fixed_k = 6;
  cfg.d = 2;
  auto plan = choose_parameters(scales, cfg);
  REQUIRE(plan.all_separated());
  CorrectorSet set = build_corrector(A, scales, plan);
  Mat Abar = effective_matrix(A, set);

  GridSpec sg(2, 1, 32);
  TorusField B = scalar_matrix_field(sg, [&](const std::vector<double>& y) {
    return aval(y[0], y[1], q * y[0], q * y[1]);
  });
  auto super = reiterated_matrix(B);
  double gap = (Abar - super.A0).abs_sum();
  CHECK(gap <= 5e-3);
  CHECK(random_direction_margin(Abar) > 0.5);
}

TEST_CASE("2-D effective matrix is elliptic and symmetric for scalar input") {
  GridSpec g(2, 1, 16);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return 2.0 + 0.8 * std::sin(2 * kPi * y[0]) * std::cos(2 * kPi * y[1]);
  });
  auto r = reiterated_matrix(A);
  CHECK(random_direction_margin(r.A0) > 0.5);
  CHECK(r.A0(0, 1) == doctest::Approx(r.A0(1, 0)).epsilon(1e-8));
}
