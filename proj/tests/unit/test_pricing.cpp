#include <doctest.h>

#include <cmath>

#include "lrf/experiments.hpp"
#include "lrf/pricing.hpp"

using namespace lrf;

namespace {

constexpr double kLambda = 0.1, kT = 1.0, kt = 0.5, kr = 0.05;

// Flat deterministic curves seen from time t.
PricingState flat_state(double t, double lambda_bar, double r, double theta_max = 100.0) {
  DensityCurveState c = DensityCurveState::flat(make_theta_grid(0.01, theta_max), lambda_bar);
  c.t = t;
  return PricingState::from(c, r);
}

PricingContext independent_ctx() {
  PricingContext ctx;
  ctx.T = kT;
  ctx.B = constant_rate_discount(kr, kt, kT);
  return ctx;
}

KernelModel quiet_model() {
  KernelModel m;
  m.intensity = CoefficientSpec::section7(0.0, 0.0, kLambda);
  m.rates = VasicekSpec::constant_loading(0.5, kr, kr, 0.0);
  m.field = FieldIncrementPlan::white_noise(0.01);
  m.pide.x_min = -0.05;
  m.pide.x_max = 0.15;
  m.pide.nx = 33;
  m.pide.y_min = 0.0;
  m.pide.y_max = 0.3;
  m.pide.ny = 31;
  m.pide.n_steps = 100;
  return m;
}

PricingContext correlated_ctx(KernelSolver& solver, double theta_max) {
  PricingContext ctx = independent_ctx();
  ctx.regime = Regime::Correlated;
  ctx.solver = &solver;
  for (int i = 0; i < 8; ++i) ctx.theta_nodes.push_back(theta_max * i / 7.0);
  return ctx;
}

} // namespace

TEST_SUITE("pricing") {

TEST_CASE("K1 in the independent regime") {
  const PricingState s = flat_state(kt, kLambda, kr);
  const PricingContext ctx = independent_ctx();
  for (double theta : {1.0, 2.5, 40.0}) {
    const double expected = kLambda * std::exp(-kLambda * theta) * ctx.B / std::exp(-kLambda * kt);
    CHECK(kernel_K1(theta, s, ctx) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("K2 with constant recovery in the independent regime") {
  const PricingState s = flat_state(kt, kLambda, kr);
  CHECK(kernel_K2(0.7, s, RecoveryModel::constant(0.4), independent_ctx()) == doctest::Approx(0.390124).epsilon(1e-6));
}

TEST_CASE("deterministic baseline price") {
  const double closed = std::exp(-0.025) * (1.0 - 0.6 * (std::exp(-0.05) - std::exp(-0.1)) / std::exp(-0.05));
  CHECK(deterministic_flat_price(kt, kT, kr, 0.4, kLambda) == doctest::Approx(closed).epsilon(1e-15));
  CHECK(closed == doctest::Approx(0.946771).epsilon(1e-6));
  const PricingState s = flat_state(kt, kLambda, kr);
  const double pre = price_pre_default_independent(kt, kT, s.theta, s.alpha, 0.4, kr, s.survival.back());
  CHECK(std::abs(pre - closed) < 1e-6);
  const PriceBreakdown p = price_defaultable_zcb(Alive{kt}, s, RecoveryModel::constant(0.4), independent_ctx());
  CHECK(std::abs(p.price - closed) < 1e-6);
}

TEST_CASE("full recovery gives the default-free bond") {
  const PricingState s = flat_state(kt, kLambda, kr);
  const PricingContext ctx = independent_ctx();
  CHECK(std::abs(price_defaultable_zcb(Alive{kt}, s, RecoveryModel::constant(1.0), ctx).price - ctx.B) < 1e-6);
  CHECK(price_pre_default_independent(kt, kT, s.theta, s.alpha, 1.0, kr, s.survival.back()) ==
        doctest::Approx(ctx.B).epsilon(1e-15));
}

TEST_CASE("defaulted bond pays recovery on the default-free bond") {
  const PricingState s = flat_state(kt, kLambda, kr);
  const PricingContext ctx = independent_ctx();
  CHECK(price_defaultable_zcb(Defaulted{0.3}, s, RecoveryModel::constant(0.4), ctx).price ==
        doctest::Approx(0.4 * ctx.B).epsilon(1e-15));
  CHECK_THROWS_AS(price_defaultable_zcb(Defaulted{0.7}, s, RecoveryModel::constant(0.4), ctx), std::invalid_argument);
}

TEST_CASE("recovery bounds and monotonicity on simulated paths") {
  ExperimentConfig cfg;
  cfg.n_paths = 20;
  cfg.lambda_bar = 0.3;
  const Section7Simulator sim(cfg);
  const double B = constant_rate_discount(cfg.r, cfg.t, cfg.T);
  for (std::uint64_t p = 0; p < cfg.n_paths; ++p) {
    const DensityCurveState c = sim.curves(p);
    double prev = -1.0;
    for (double R : {0.0, 0.2, 0.4, 0.7, 1.0}) {
      const double price = price_pre_default_independent(cfg.t, cfg.T, c.theta, c.alpha, R, cfg.r, c.survival.back());
      CHECK(price >= R * B - 1e-12);
      CHECK(price <= B + 1e-12);
      CHECK(price >= prev);
      prev = price;
    }
  }
}

TEST_CASE("regime consistency without noise") {
  const double theta_max = 100.0;
  const PricingState s = flat_state(kt, kLambda, kr, theta_max);
  KernelSolver solver(quiet_model());
  const PricingContext corr = correlated_ctx(solver, theta_max);
  const PricingContext ind = independent_ctx();
  const RecoveryModel rec = RecoveryModel::constant(0.4);
  for (double theta : {0.6, 1.0, 3.3, 50.0}) {
    CHECK(std::abs(kernel_K1(theta, s, corr) - kernel_K1(theta, s, ind)) < 1e-6);
    CHECK(std::abs(kernel_K2(theta, s, rec, corr) - kernel_K2(theta, s, rec, ind)) < 1e-6);
  }
  const double pc = price_defaultable_zcb(Alive{kt}, s, rec, corr).price;
  const double pi = price_defaultable_zcb(Alive{kt}, s, rec, ind).price;
  CHECK(std::abs(pc - pi) < 1e-6);
}

TEST_CASE("intensity-linked recovery") {
  const double theta_max = 100.0;
  const PricingState s = flat_state(kt, kLambda, kr, theta_max);
  KernelSolver solver(quiet_model());
  const PricingContext ctx = correlated_ctx(solver, theta_max);
  const RecoveryModel linked(IntensityLinkedRecovery{0.3, 0.5, [](double y) { return y; }, "identity"});
  CHECK(kernel_K2(0.8, s, linked, ctx) == doctest::Approx(ctx.B * (0.3 + 0.5 * std::exp(-kLambda))).epsilon(1e-8));
  const RecoveryModel reduced(IntensityLinkedRecovery{0.4, 0.0, [](double y) { return y; }, "identity"});
  CHECK(kernel_K2(0.8, s, reduced, ctx) ==
        doctest::Approx(kernel_K2(0.8, s, RecoveryModel::constant(0.4), ctx)).epsilon(1e-14));
  CHECK_THROWS_WITH_AS(RecoveryModel(IntensityLinkedRecovery{0.7, 0.5, [](double y) { return y; }, "identity"}),
                       "[pricing] w0+w1 ≤ 1 violated", std::invalid_argument);
}

TEST_CASE("pricing errors") {
  PricingState dead = flat_state(kt, kLambda, kr);
  for (double& v : dead.survival) v = 0.0;
  CHECK_THROWS_WITH_AS(kernel_K1(1.0, dead, independent_ctx()), "degenerate survival", std::domain_error);

  KernelSolver solver(quiet_model());
  PricingState zero = flat_state(kt, kLambda, kr);
  for (double& v : zero.lambda) v = 0.0;
  CHECK_THROWS_AS(kernel_K2(0.8, zero, RecoveryModel::constant(0.4), correlated_ctx(solver, 100.0)),
                  std::domain_error);
  CHECK_THROWS_AS(RecoveryModel::constant(1.5), std::invalid_argument);
  CHECK_THROWS_AS(parse_regime("hybrid"), std::invalid_argument);
}

}
