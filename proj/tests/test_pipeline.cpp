#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homoscale/experiments.hpp"
#include "homoscale/pipeline.hpp"

#include "oracles.hpp"

using namespace homoscale;
constexpr double kPi = std::numbers::pi;

namespace {
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
}  // namespace

TEST_CASE("group_scales selection rule") {
  PipelineConfig cfg;
  cfg.plan.default_gap_constant = 0.1;

  SUBCASE("n = 3 with a wide inner pair but crowded leading gap: m = 2") {
    auto grouping = group_scales(ScaleVector({1e-1, 0.9e-1, 1e-5}), cfg);
    CHECK(grouping.m == 2);
    CHECK_FALSE(grouping.degenerate);
    CHECK(grouping.branch == 1);  // 0.09 > 2^0 * 0.1 * 0.1
  }
  SUBCASE("n = 3 fully separated: single group m = 3") {
    auto grouping = group_scales(ScaleVector({1e-1, 1e-3, 1e-7}), cfg);
    CHECK(grouping.m == 3);
    CHECK(grouping.branch == 0);
  }
  SUBCASE("n = 2 crowded pair degenerates with a warning") {
    auto grouping = group_scales(ScaleVector({0.1, 0.09}), cfg);
    CHECK(grouping.degenerate);
    CHECK(grouping.m == 1);
    CHECK(grouping.note.find("trivial") != std::string::npos);
  }
  SUBCASE("engineered second-branch break at gap 1-2") {
    PipelineConfig cfg2;
    cfg2.plan.default_gap_constant = 0.1;
    cfg2.plan.gap_constants[3] = 0.01;
    auto grouping = group_scales(ScaleVector({0.1, 9e-4, 3e-6}), cfg2);
    CHECK(grouping.m == 2);
    CHECK(grouping.branch == 2);
    CHECK(grouping.witness_p == 3);
    // Break dominance: eps2/eps1 <= e * exp(-2^{m-n} c_p eps2/eps3).
    double lhs = 9e-4 / 0.1;
    double rhs = std::exp(1.0) * std::exp(-0.5 * 0.01 * (9e-4 / 3e-6));
    CHECK(lhs <= rhs);
  }
  SUBCASE("idempotence and config-map order independence") {
    PipelineConfig c1, c2;
    c1.plan.gap_constants[2] = 0.15;
    c1.plan.gap_constants[3] = 0.05;
    c2.plan.gap_constants[3] = 0.05;
    c2.plan.gap_constants[2] = 0.15;
    ScaleVector sv({0.1, 5e-3, 1e-6});
    auto g1 = group_scales(sv, c1);
    auto g2 = group_scales(sv, c2);
    auto g3 = group_scales(sv, c1);
    CHECK(g1.m == g2.m);
    CHECK(g1.branch == g2.branch);
    CHECK(g1.m == g3.m);
    CHECK(g1.witness_p == g3.witness_p);
  }
}

TEST_CASE("homogenize: constant coefficient is a fixed point") {
  GridSpec g(1, 2, 16);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>&) { return 2.0; });
  ScaleVector scales({0.1, 1e-3});
  auto report = homogenize(A, scales);
  CHECK(report.Abar(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(report.budget >= scales.epsilons[0]);
  CHECK(report.stages.size() == 1);
}

TEST_CASE("homogenize: n = 2 separated equals the one-shot effective matrix") {
  GridSpec g(1, 2, 64);
  TorusField A = scalar_matrix_field(g, [](const std::vector<double>& y) {
    return 3.0 + std::sin(2 * kPi * y[0]) + std::sin(2 * kPi * y[1]) +
           0.8 * std::sin(2 * kPi * y[0]) * std::sin(2 * kPi * y[1]);
  });
  ScaleVector scales({0.1, 1e-3});
  PipelineConfig cfg;
  auto report = homogenize(A, scales, cfg);
  REQUIRE(report.stages.size() == 1);
  CHECK(report.stages[0].kind == "simultaneous");
  CHECK(report.stages[0].group_size == 2);

  auto plan = choose_parameters(scales, cfg.plan);
  CorrectorSet set = build_corrector(A, scales, plan);
  Mat direct = effective_matrix(A, set);
  CHECK(std::abs(report.Abar(0, 0) - direct(0, 0)) <= 1e-10);
}

TEST_CASE("homogenize: n = 3 with engineered break composes to the harmonic mean") {
  auto aval = [](double y1, double y2, double y3) {
    return 4.0 + std::sin(2 * kPi * y1) + std::sin(2 * kPi * y2) + std::sin(2 * kPi * y3);
  };
  GridSpec g(1, 3, 32);
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1], y[2]);
  });
  ScaleVector scales({0.1, 9e-4, 3e-6});
  PipelineConfig cfg;
  cfg.plan.default_gap_constant = 0.1;
  cfg.plan.gap_constants[3] = 0.01;
  auto report = homogenize(A, scales, cfg);

  // Stage log: one simultaneous group of size 2, one classical step.
  REQUIRE(report.stages.size() == 2);
  CHECK(report.stages[0].kind == "simultaneous");
  CHECK(report.stages[0].group_size == 2);
  CHECK(report.stages[0].branch == 2);
  CHECK(report.stages[1].kind == "classical");
  CHECK(report.stages[1].group_size == 1);

  // Full harmonic mean by quadrature (1-D reiterated limit).
  double inv = 0.0;
  const int P = 48;
  inv = quad::integrate(
      [&](double y1) {
        return quad::integrate2d(
            [&](double y2, double y3) { return 1.0 / aval(y1, y2, y3); }, P);
      },
      0.0, 1.0, P);
  double a0 = 1.0 / inv;
  CHECK(std::abs(report.Abar(0, 0) - a0) <= 1e-3);
}

TEST_CASE("toy averaging closed forms and quadrature cross-check") {
  SUBCASE("constant f: rho = |int g(x/eps) - mean| is O(eps)") {
    TrigPoly f{1.0, {}};
    TrigPoly g{0.0, {{1, 0.0, 1.0}}};
    double rho = toy_averaging(f, g, 1e-3, 5.0);
    CHECK(rho <= 2.0 * 1e-3);
  }
  SUBCASE("constant g: rho = |int sin(2 pi x/(beta eps)) dx| <= beta eps / pi") {
    TrigPoly f{0.0, {{1, 0.0, 1.0}}};
    TrigPoly g{1.0, {}};
    const double eps = 1e-3, beta = 5.5;
    double rho = toy_averaging(f, g, eps, beta);
    double w = 2 * kPi / (beta * eps);
    double closed = std::abs((1.0 - std::cos(w)) / w);
    CHECK(rho == doctest::Approx(closed).epsilon(1e-12));
    CHECK(rho <= beta * eps / kPi + 1e-15);
  }
  SUBCASE("modewise evaluation agrees with direct quadrature to 1e-9") {
    TrigPoly f{0.0, {{1, 0.0, 1.0}}};
    TrigPoly g{0.0, {{1, 0.0, 1.0}}};
    const double eps = 1e-3, beta = 7.5;
    double rho = toy_averaging(f, g, eps, beta);
    double cycles = (1.0 / beta + 1.0) / eps;
    int panels = static_cast<int>(std::ceil(8.0 * cycles));
    double integral = quad::integrate(
        [&](double x) { return f(x / (beta * eps)) * g(x / eps); }, 0.0, 1.0, panels);
    CHECK(std::abs(rho - std::abs(integral)) <= 1e-9);
  }
}

TEST_CASE("experiments run and report against their pinned thresholds") {
  const std::string outdir = "experiment_scratch";
  nlohmann::json cfg = {{"source", "unit-test"}};

  SUBCASE("toy_averaging") {
    auto res = experiments::run_experiment("toy_averaging", cfg, outdir);
    CHECK(res.pass);
    CHECK(res.summary["regression_slope"].get<double>() < 0.0);
    CHECK(res.summary["regression_r2"].get<double>() >= 0.9);
  }
  SUBCASE("rate_2d") {
    auto res = experiments::run_experiment("rate_2d", cfg, outdir);
    CHECK(res.pass);
    CHECK(res.summary["slope"].get<double>() > 0.7);
  }
  SUBCASE("counterexample_nonseparated") {
    auto res = experiments::run_experiment("counterexample_nonseparated", cfg, outdir);
    CHECK(res.pass);
  }
  SUBCASE("counterexample_exponential") {
    auto res = experiments::run_experiment("counterexample_exponential", cfg, outdir);
    CHECK(res.pass);
  }
  SUBCASE("lipschitz_probe") {
    auto res = experiments::run_experiment("lipschitz_probe", cfg, outdir);
    CHECK(res.pass);
    CHECK(res.summary["max_dyadic_ratio"].get<double>() > 0.0);
  }
  SUBCASE("unknown experiment is rejected") {
    CHECK_THROWS_AS(experiments::run_experiment("nope", cfg, outdir), ValidationError);
  }
}
