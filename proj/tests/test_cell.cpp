#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "homoscale/cell.hpp"
#include "homoscale/coefficient.hpp"
#include "homoscale/scales.hpp"

#include "oracles.hpp"

using namespace homoscale;
namespace fo = homoscale::field_ops;

namespace {
constexpr double kPi = std::numbers::pi;

TorusField scalar_field(const GridSpec& g, const std::function<double(const std::vector<double>&)>& f) {
  TorusField out(g, 0);
  std::vector<double> y(g.axes());
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    for (int a = 0; a < g.axes(); ++a) y[a] = g.coord(p, a);
    out.value(0, p) = f(y);
  }
  return out;
}

TorusField vector_field(const GridSpec& g, int comp,
                        const std::function<double(const std::vector<double>&)>& f) {
  TorusField out(g, 1);
  std::vector<double> y(g.axes());
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    for (int a = 0; a < g.axes(); ++a) y[a] = g.coord(p, a);
    out.value(comp, p) = f(y);
  }
  return out;
}

TorusField identity_matrix_field(const GridSpec& g) {
  TorusField out(g, 2);
  for (int i = 0; i < g.d; ++i) {
    auto c = out.comp(i * g.d + i);
    std::fill(c.begin(), c.end(), 1.0);
  }
  return out;
}

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

TEST_CASE("single-mode identity problems have closed-form solutions") {
  SUBCASE("A = I, tau = 0, F = (sin(2 pi y), 0): Y = cos(2 pi y) / (2 pi)") {
    GridSpec g(2, 1, 16);
    TorusField A = identity_matrix_field(g);
    TorusField F = vector_field(g, 0, [](const std::vector<double>& y) {
      return std::sin(2 * kPi * y[0]);
    });
    CellProblem p{&A, &F, nullptr, 0.0};
    auto [Y, diag] = solve_inner(p);
    for (std::size_t q = 0; q < g.npoints(); ++q) {
      double want = std::cos(2 * kPi * g.coord(q, 0)) / (2 * kPi);
      CHECK(Y.value(0, q) == doctest::Approx(want).epsilon(1e-9));
    }
    CHECK(diag.max_rel_residual <= 1e-10);
  }
  SUBCASE("A = I, tau = 1, G = cos(2 pi y): Y = cos(2 pi y) / (4 pi^2 + 1)") {
    GridSpec g(1, 1, 32);
    TorusField A = identity_matrix_field(g);
    TorusField G = scalar_field(g, [](const std::vector<double>& y) {
      return std::cos(2 * kPi * y[0]);
    });
    CellProblem p{&A, nullptr, &G, 1.0};
    auto [Y, diag] = solve_inner(p);
    for (std::size_t q = 0; q < g.npoints(); ++q) {
      double want = std::cos(2 * kPi * g.coord(q, 0)) / (4 * kPi * kPi + 1.0);
      CHECK(Y.value(0, q) == doctest::Approx(want).epsilon(1e-9));
    }
  }
}

TEST_CASE("1-D corrector equation reproduces the harmonic mean (quadrature oracle)") {
  // a(y) = 3 + sin(2 pi y); the corrector satisfies a (1 + Y') = harmonic mean.
  GridSpec g(1, 1, 64);
  auto aval = [](double y) { return 3.0 + std::sin(2 * kPi * y); };
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) { return aval(y[0]); });
  TorusField F = vector_field(g, 0, [&](const std::vector<double>& y) { return aval(y[0]); });
  CellProblem p{&A, &F, nullptr, 0.0};
  auto [Y, diag] = solve_inner(p);

  const double abar = oracles::harmonic_mean_1d(aval);  // = sqrt(8)
  CHECK(abar == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  TorusField dY = fo::scale_partial(Y, 0, 1);
  // Y' = abar / a - 1 pointwise.
  for (std::size_t q = 0; q < g.npoints(); ++q) {
    double y = g.coord(q, 0);
    CHECK(dY.value(0, q) == doctest::Approx(abar / aval(y) - 1.0).epsilon(1e-8));
  }
}

TEST_CASE("solvability violation is rejected at tau = 0") {
  GridSpec g(1, 1, 16);
  TorusField A = identity_matrix_field(g);
  TorusField G = scalar_field(g, [](const std::vector<double>&) { return 1.0; });
  CellProblem p{&A, nullptr, &G, 0.0};
  CHECK_THROWS_AS(solve_inner(p), ValidationError);
}

TEST_CASE("residual_inner certifies solutions and perturbations") {
  GridSpec g(1, 1, 32);
  TorusField A = identity_matrix_field(g);
  const double tau = 0.5;
  TorusField G = scalar_field(g, [](const std::vector<double>& y) {
    return std::cos(2 * kPi * y[0]);
  });
  CellProblem p{&A, nullptr, &G, tau};
  auto [Y, diag] = solve_inner(p);

  SUBCASE("converged solution has tiny residual") {
    CHECK(residual_inner(p, Y) <= 1e-10);
  }
  SUBCASE("zero guess has residual = ||G||") {
    TorusField zero(g, 0);
    // Discrete L2 of cos is 1/sqrt(2).
    CHECK(residual_inner(p, zero) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("spectral perturbation oracle: residual of Y + eps sin") {
    TorusField pert = Y;
    for (std::size_t q = 0; q < g.npoints(); ++q)
      pert.value(0, q) += 1e-3 * std::sin(2 * kPi * g.coord(q, 0));
    // The operator maps sin to (4 pi^2 + tau^2) sin; L2 of sin is 1/sqrt(2).
    double want = (4 * kPi * kPi + tau * tau) * 1e-3 / std::sqrt(2.0);
    CHECK(residual_inner(p, pert) == doctest::Approx(want).epsilon(0.01));
  }
}

TEST_CASE("parametric outer nodes solve an n = 2 family (quadrature oracle)") {
  // a(y1, y2) = 3 + sin(2 pi y1) + sin(2 pi y2); at fixed y1 the inner
  // corrector derivative is abar(y1)/a - 1 with abar the harmonic mean in y2.
  GridSpec g(1, 2, 32);
  auto aval = [](double y1, double y2) {
    return 3.0 + std::sin(2 * kPi * y1) + std::sin(2 * kPi * y2);
  };
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1]);
  });
  TorusField F(g, 1);
  for (std::size_t q = 0; q < g.npoints(); ++q)
    F.value(0, q) = A.value(0, q);
  CellProblem p{&A, &F, nullptr, 0.0};
  auto [Y, diag] = solve_inner(p);
  TorusField dY = fo::scale_partial(Y, 1, 1);
  for (int spot = 0; spot < 8; ++spot) {
    std::size_t o = static_cast<std::size_t>(spot) * 4;  // outer node index
    double y1 = static_cast<double>(o) / 32.0;
    double abar = oracles::harmonic_mean_1d([&](double y2) { return aval(y1, y2); });
    for (std::size_t i = 0; i < 32; ++i) {
      double y2 = static_cast<double>(i) / 32.0;
      double want = abar / aval(y1, y2) - 1.0;
      CHECK(dY.value(0, o * 32 + i) == doctest::Approx(want).epsilon(1e-7));
    }
  }
}

TEST_CASE("solver invariants") {
  GridSpec g(1, 1, 64);
  auto aval = [](double y) { return 3.0 + std::sin(2 * kPi * y); };
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) { return aval(y[0]); });
  TorusField F = vector_field(g, 0, [&](const std::vector<double>& y) { return aval(y[0]); });
  TorusField G = scalar_field(g, [](const std::vector<double>& y) {
    return std::cos(2 * kPi * y[0]);
  });

  SUBCASE("linearity in (F, G)") {
    CellProblem pf{&A, &F, nullptr, 0.5};
    CellProblem pg{&A, nullptr, &G, 0.5};
    auto [Yf, d1] = solve_inner(pf);
    auto [Yg, d2] = solve_inner(pg);
    CellProblem both{&A, &F, &G, 0.5};
    auto [Yb, d3] = solve_inner(both);
    TorusField sum = Yf + Yg;
    sum -= Yb;
    CHECK(fo::linf_norm(sum) <= 1e-9);
  }

  SUBCASE("uniqueness from different initial guesses") {
    CellProblem p{&A, &F, nullptr, 0.0};
    auto [Y1, d1] = solve_inner(p);
    TorusField guess = scalar_field(g, [](const std::vector<double>& y) {
      return 0.3 * std::sin(2 * kPi * 2 * y[0]) + 0.1;
    });
    CellSolveOptions opts;
    opts.initial_guess = &guess;
    auto [Y2, d2] = solve_inner(p, opts);
    TorusField diff = Y1 - Y2;
    CHECK(fo::linf_norm(diff) <= 1e-8);
  }

  SUBCASE("grid refinement changes band-limited solutions by <= 1e-8") {
    GridSpec g2(1, 1, 128);
    TorusField A2 = scalar_matrix_field(g2, [&](const std::vector<double>& y) { return aval(y[0]); });
    TorusField F2 = vector_field(g2, 0, [&](const std::vector<double>& y) { return aval(y[0]); });
    CellProblem p1{&A, &F, nullptr, 0.0};
    CellProblem p2{&A2, &F2, nullptr, 0.0};
    auto [Y1, d1] = solve_inner(p1);
    auto [Y2, d2] = solve_inner(p2);
    // Compare on the common (coarse) nodes.
    double worst = 0.0;
    for (std::size_t q = 0; q < 64; ++q)
      worst = std::max(worst, std::abs(Y1.value(0, q) - Y2.value(0, 2 * q)));
    CHECK(worst <= 1e-8);
  }

  SUBCASE("energy certificate is finite and stable under refinement") {
    CellProblem p{&A, &F, nullptr, 0.0};
    auto [Y1, d1] = solve_inner(p);
    GridSpec g2(1, 1, 128);
    TorusField A2 = scalar_matrix_field(g2, [&](const std::vector<double>& y) { return aval(y[0]); });
    TorusField F2 = vector_field(g2, 0, [&](const std::vector<double>& y) { return aval(y[0]); });
    CellProblem p2{&A2, &F2, nullptr, 0.0};
    auto [Y2, d2] = solve_inner(p2);
    CHECK(d1.energy_ratio > 0.0);
    CHECK(d1.energy_ratio < 50.0);
    CHECK(d1.energy_ratio == doctest::Approx(d2.energy_ratio).epsilon(1e-6));
  }
}

TEST_CASE("nonsymmetric coefficients fall back to a transpose-free solve") {
  GridSpec g(2, 1, 16);
  TorusField A(g, 2);
  for (std::size_t p = 0; p < g.npoints(); ++p) {
    double y1 = g.coord(p, 0);
    A.value(0, p) = 2.0;                                 // a11
    A.value(1, p) = 0.5 * std::sin(2 * kPi * y1);        // a12, no mirror term
    A.value(2, p) = 0.0;                                 // a21
    A.value(3, p) = 2.0;                                 // a22
  }
  TorusField F = vector_field(g, 0, [](const std::vector<double>& y) {
    return std::sin(2 * kPi * y[0]);
  });
  CellProblem p{&A, &F, nullptr, 0.5};
  auto [Y, diag] = solve_inner(p);
  CHECK(diag.max_rel_residual <= 1e-10);
  CHECK(residual_inner(p, Y) <= 1e-8);
}

TEST_CASE("equal scales are refused with a merge suggestion") {
  CHECK_THROWS_WITH_AS(ScaleVector({0.1, 0.1}), doctest::Contains("merge"), ValidationError);
}

TEST_CASE("2-D variable coefficient solve carries a certified residual") {
  GridSpec g(2, 1, 32);
  auto aval = [](double y1, double y2) {
    return 2.0 + 0.8 * std::sin(2 * kPi * y1) * std::cos(2 * kPi * y2);
  };
  TorusField A = scalar_matrix_field(g, [&](const std::vector<double>& y) {
    return aval(y[0], y[1]);
  });
  TorusField F = vector_field(g, 0, [&](const std::vector<double>& y) {
    return aval(y[0], y[1]);
  });
  CellProblem p{&A, &F, nullptr, 0.0};
  auto [Y, diag] = solve_inner(p);
  CHECK(diag.max_rel_residual <= 1e-10);
  CHECK(residual_inner(p, Y) <= 1e-8);
  CHECK(std::abs(fo::full_average(Y)[0]) <= 1e-13);
}
