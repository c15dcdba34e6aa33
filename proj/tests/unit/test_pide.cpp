#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lrf/pide.hpp"

using namespace lrf;

namespace {

CoefficientSpec constant_sigma(double s0) {
  return CoefficientSpec::general([s0](double, double, double) { return s0; }, [](double, double, double) { return 0.0; },
                                  [](double) { return 0.1; }, 0.001);
}

OperatorCoefficients zero_coefficients() { return OperatorCoefficients{}; }

PideConfig small_grid(double x0, double x1, int nx, double y0, double y1, int ny, int steps) {
  PideConfig c;
  c.x_min = x0;
  c.x_max = x1;
  c.nx = nx;
  c.y_min = y0;
  c.y_max = y1;
  c.ny = ny;
  c.n_steps = steps;
  return c;
}

// Quiet model: no intensity noise, no rate noise, r sits at delta.
KernelModel quiet_model(int nx, int ny, int steps) {
  KernelModel m;
  m.intensity = CoefficientSpec::section7(0.0, 0.0, 0.1);
  m.rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.0);
  m.field = FieldIncrementPlan::white_noise(0.01);
  m.pide = small_grid(-0.05, 0.15, nx, 0.0, 0.3, ny, steps);
  return m;
}

} // namespace

TEST_SUITE("pide") {

TEST_CASE("coefficients without rate loading") {
  const CoefficientSpec spec = CoefficientSpec::section7(0.01, 1.0, 0.1);
  const VasicekSpec rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.0);
  const OperatorCoefficients c = compute_coefficients(spec, rates, FieldIncrementPlan::white_noise(0.01),
                                                      LevyMeasure::none(), 0.2, 1.5);
  CHECK(c.delta_hat == 0.05);
  CHECK(c.a11 == 0.0);
  CHECK(c.a12 == 0.0);
  CHECK(c.a22 > 0.0);
}

TEST_CASE("coefficients with zero intensity noise") {
  const CoefficientSpec spec = CoefficientSpec::section7(0.0, 0.0, 0.1);
  const VasicekSpec rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.02);
  const OperatorCoefficients c = compute_coefficients(spec, rates, FieldIncrementPlan::white_noise(0.01),
                                                      LevyMeasure::none(), 0.2, 1.5);
  CHECK(c.delta_hat == 0.05);
  CHECK(c.a22 == 0.0);
  CHECK(c.a12 == 0.0);
  CHECK(c.a11 == doctest::Approx(0.0002).epsilon(1e-14));
}

TEST_CASE("dirac kernel with constant loadings") {
  const double s0 = 0.03, rho0 = 0.02, kappa = 0.5, theta = 2.0;
  const VasicekSpec rates = VasicekSpec::constant_loading(kappa, 0.05, 0.05, rho0);
  const FieldIncrementPlan plan = FieldIncrementPlan::white_noise(0.01);
  const OperatorCoefficients c = compute_coefficients(constant_sigma(s0), rates, plan, LevyMeasure::none(), 0.0, theta);
  CHECK(c.a11 == doctest::Approx(rho0 * rho0 / 2.0).epsilon(1e-14));
  CHECK(c.a22 == doctest::Approx(s0 * s0 / 2.0).epsilon(1e-14));
  CHECK(c.a12 == doctest::Approx(s0 * rho0).epsilon(1e-14));
  CHECK(c.delta_hat == doctest::Approx(0.05 - rho0 * s0 * theta / kappa).epsilon(1e-10));
  CoefficientOptions printed;
  printed.delta_hat_sign = DeltaHatSign::AsPrinted;
  const OperatorCoefficients p = compute_coefficients(constant_sigma(s0), rates, plan, LevyMeasure::none(), 0.0, theta,
                                                      printed);
  CHECK(p.delta_hat == doctest::Approx(0.05 + rho0 * s0 * theta / kappa).epsilon(1e-10));
}

TEST_CASE("intensity drift under the maturity measure vanishes") {
  const CoefficientSpec spec = CoefficientSpec::section7(0.01, 1.0, 0.1);
  const VasicekSpec rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.01);
  const LevyMeasure nu(ExponentialDensity{10.0, 1e-3});
  for (double t : {0.0, 0.4, 1.2})
    for (double theta : {0.5, 1.5, 5.0}) {
      const OperatorCoefficients c =
          compute_coefficients(spec, rates, FieldIncrementPlan::white_noise(0.01), nu, t, theta);
      CHECK(std::abs(c.a_drift) < 1e-15 + 1e-10 * mc_drift(spec, FieldIncrementPlan::white_noise(0.01), nu, t, theta));
    }
}

TEST_CASE("jump operator: affine functions are annihilated") {
  const StateGrid g(-0.1, 0.3, 21, 0.0, 0.4, 21);
  const GridFunction k = GridFunction::from(g, [](double x, double y) { return 1.0 + 2.0 * x + 3.0 * y; }, 0.0);
  OperatorCoefficients c;
  c.jump_weight = {3.0, 0.5};
  c.jump_x = {0.01, -0.03};
  c.jump_y = {0.013, 0.05};
  const GridFunction out = apply_jump_operator(k, c);
  CHECK(out.values.cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("jump operator on a quadratic") {
  const StateGrid g(-0.1, 0.3, 21, 0.0, 0.4, 21);
  const double g0 = 2.0 * g.hy(), m = 4.0;
  const GridFunction k = GridFunction::from(g, [](double, double y) { return y * y; }, 0.0);
  OperatorCoefficients c;
  c.jump_weight = {m};
  c.jump_x = {0.0};
  c.jump_y = {g0};
  const GridFunction out = apply_jump_operator(k, c);
  for (int j = 1; j < g.ny - 3; ++j)
    for (int i = 0; i < g.nx; ++i) CHECK(out.at(i, j) == doctest::Approx(m * g0 * g0).epsilon(1e-10));
}

TEST_CASE("jump operator with the null measure is zero") {
  const StateGrid g(-0.1, 0.3, 16, 0.0, 0.4, 16);
  const GridFunction k = GridFunction::from(g, [](double x, double y) { return std::exp(x) * y * y; }, 0.0);
  CHECK(apply_jump_operator(k, zero_coefficients()).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("pure discount ODE per node") {
  const PideConfig cfg = small_grid(0.0, 0.1, 16, 0.0, 0.3, 16, 2000);
  const GridFunction k = solve_cauchy([](double, double) { return 1.0; }, cfg, 0.0, 1.0,
                                      [](double) { return zero_coefficients(); });
  for (int j = 1; j < cfg.ny - 1; ++j)
    for (int i = 1; i < cfg.nx - 1; ++i)
      CHECK(std::abs(k.at(i, j) - std::exp(-k.grid.x(i))) < 1e-10);
}

TEST_CASE("K_breve at maturity and in the quiet model") {
  KernelSolver solver(quiet_model(33, 31, 200));
  CHECK(kernel_K_breve(solver, 1.0, 1.0, 0.05, 0.17, 1.5) == 0.17);
  // r = delta is a grid node and lambda = 0.1 a y node.
  const double k = kernel_K_breve(solver, 0.5, 1.0, 0.05, 0.1, 1.5);
  CHECK(k == doctest::Approx(0.1 * std::exp(-0.05 * 0.5)).epsilon(1e-9));
}

TEST_CASE("K_tilde reductions") {
  KernelSolver solver(quiet_model(33, 31, 200));
  auto zero = [](double) { return 0.0; };
  auto ident = [](double y) { return y; };
  CHECK(kernel_K_tilde(solver, 0.5, 1.0, 0.05, 0.1, 1.5, zero, "zero") ==
        kernel_K_breve(solver, 0.5, 1.0, 0.05, 0.1, 1.5));
  CHECK(kernel_K_tilde(solver, 1.0, 1.0, 0.05, 0.1, 1.5, ident, "identity") == 0.1 * std::exp(-0.1));
  CHECK(kernel_K_tilde(solver, 0.5, 1.0, 0.05, 0.1, 1.5, ident, "identity") ==
        doctest::Approx(0.1 * std::exp(-0.1) * std::exp(-0.025)).epsilon(1e-9));
}

TEST_CASE("queries outside the grid are rejected") {
  KernelSolver solver(quiet_model(33, 31, 50));
  CHECK_THROWS_AS(kernel_K_breve(solver, 0.5, 1.0, 0.5, 0.1, 1.5), std::out_of_range);
  CHECK_THROWS_AS(kernel_K_breve(solver, 0.5, 1.0, 0.05, -0.2, 1.5), std::out_of_range);
}

TEST_CASE("maximum principle for a nonnegative terminal condition") {
  KernelModel m;
  m.intensity = CoefficientSpec::section7(0.01, 1.0, 0.1);
  m.rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.01);
  m.field = FieldIncrementPlan::white_noise(0.01);
  m.measure = LevyMeasure(ExponentialDensity{10.0, 1e-3});
  const PideConfig cfg = small_grid(0.0, 0.2, 48, 0.0, 0.3, 48, 100);
  auto provider = [&](double u) {
    return compute_coefficients(m.intensity, m.rates, m.field, m.measure, u, 1.5, m.options);
  };
  auto psi = [](double, double y) { return y * std::exp(-10.0 * (y - 0.1) * (y - 0.1)); };
  double sup = 0.0;
  for (int j = 0; j < cfg.ny; ++j) sup = std::max(sup, psi(0.0, cfg.grid().y(j)));
  const GridFunction k = solve_cauchy(psi, cfg, 0.5, 1.0, provider);
  // edge rows hold the extrapolation condition, not the equation
  const StateGrid g = cfg.grid();
  double lo = 1e300, hi = -1e300;
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) {
      const double v = k.values(static_cast<Eigen::Index>(g.index(i, j)));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(lo >= -1e-12);
  CHECK(hi <= sup * (1.0 + 1e-9));
}

TEST_CASE("picard mode agrees with the explicit jump term") {
  KernelModel m;
  m.intensity = CoefficientSpec::section7(0.01, 1.0, 0.1);
  m.rates = VasicekSpec::constant_loading(0.5, 0.05, 0.05, 0.01);
  m.rates.phi = [](double, double xi) { return 2.0 * xi; };
  m.field = FieldIncrementPlan::white_noise(0.01);
  m.measure = LevyMeasure(ExponentialDensity{10.0, 1e-2});
  PideConfig cfg = small_grid(-0.05, 0.15, 32, 0.0, 0.3, 32, 100);
  auto provider = [&](double u) {
    return compute_coefficients(m.intensity, m.rates, m.field, m.measure, u, 1.5, m.options);
  };
  auto psi = [](double, double y) { return y; };
  // explicit and weighted jump terms differ by O(dt); the gap must shrink with the step
  auto gap = [&](int steps) {
    cfg.n_steps = steps;
    cfg.picard_mode = false;
    const GridFunction a = solve_cauchy(psi, cfg, 0.5, 1.0, provider);
    cfg.picard_mode = true;
    SolveReport rep;
    const GridFunction b = solve_cauchy(psi, cfg, 0.5, 1.0, provider, &rep);
    CHECK(rep.picard_iterations >= cfg.n_steps);
    return (a.values - b.values).cwiseAbs().maxCoeff() / a.values.cwiseAbs().maxCoeff();
  };
  const double coarse = gap(100), fine = gap(200);
  MESSAGE("picard gap " << coarse << " -> " << fine);
  CHECK(coarse < 1e-4);
  CHECK(coarse / fine > 1.6);
}

TEST_CASE("explicit jump stability bound is enforced") {
  KernelModel m = quiet_model(16, 16, 10);
  m.intensity = CoefficientSpec::section7(0.0, 1.0, 0.1);
  m.measure = LevyMeasure(ExponentialDensity{1000.0, 1e-4});
  auto provider = [&](double u) {
    return compute_coefficients(m.intensity, m.rates, m.field, m.measure, u, 1.5, m.options);
  };
  CHECK_THROWS_AS(solve_cauchy([](double, double y) { return y; }, m.pide, 0.0, 1.0, provider), std::invalid_argument);
}

TEST_CASE("option parsing") {
  CHECK(parse_delta_hat_sign("derived") == DeltaHatSign::Derived);
  CHECK(parse_delta_hat_sign("as_printed") == DeltaHatSign::AsPrinted);
  CHECK(parse_jump_compensator("measure_changed") == JumpCompensator::MeasureChanged);
  CHECK_THROWS_AS(parse_jump_compensator("other"), std::invalid_argument);
}

}
