#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lrf/experiments.hpp"
#include "lrf/pricing.hpp"

using namespace lrf;

namespace {

ExperimentConfig small(std::size_t n) {
  ExperimentConfig c;
  c.n_paths = n;
  return c;
}

} // namespace

TEST_SUITE("experiments") {

TEST_CASE("kde of two points") {
  const std::vector<double> x{0.0, 1.0};
  const double h = kde_bandwidth(x);
  CHECK(h == doctest::Approx(1.06 * std::sqrt(0.5) * std::pow(2.0, -0.2)).epsilon(1e-14));
  const double phi = std::exp(-0.5 * (0.5 / h) * (0.5 / h)) / std::sqrt(2.0 * std::numbers::pi);
  CHECK(kde(x, {0.5})[0] == doctest::Approx(phi / h).epsilon(1e-14));
}

TEST_CASE("kde integrates to one") {
  std::vector<double> x;
  RandomStream g(1, 0, Channel::Gaussian);
  for (int i = 0; i < 500; ++i) x.push_back(0.9 + 0.01 * g.normal() + (i % 7 == 0 ? 0.05 : 0.0));
  const double h = kde_bandwidth(x);
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double a = *lo - 10.0 * h, b = *hi + 10.0 * h;
  const int n = 20001;
  std::vector<double> grid(n);
  for (int i = 0; i < n; ++i) grid[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  const auto f = kde(x, grid);
  double s = 0.0;
  for (int i = 1; i < n; ++i) s += 0.5 * (grid[i] - grid[i - 1]) * (f[i] + f[i - 1]);
  CHECK(std::abs(s - 1.0) < 1e-6);
}

TEST_CASE("kde rejects degenerate samples") {
  CHECK_THROWS_WITH_AS(kde_bandwidth({1.0}), "degenerate sample", std::invalid_argument);
  CHECK_THROWS_WITH_AS(kde_bandwidth({2.0, 2.0, 2.0}), "degenerate sample", std::invalid_argument);
}

TEST_CASE("deterministic baseline: every path prices at the closed form") {
  ExperimentConfig c = small(50);
  c.sigma = 0.0;
  c.b = 0.0;
  const double closed = deterministic_flat_price(c.t, c.T, c.r, c.R, c.lambda_bar);
  const PriceDistribution d = run_price_distribution(c);
  REQUIRE(d.prices.size() == 50);
  for (double p : d.prices) CHECK(std::abs(p - closed) < 1e-6);
  CHECK(d.flagged_count() == 0);
}

TEST_CASE("aggregated evaluation reproduces the stepwise scheme") {
  for (JumpSign sign : {JumpSign::Section7, JumpSign::Section3}) {
    ExperimentConfig c = small(4);
    c.jump_sign = sign;
    c.lambda_bar = 0.3;
    c.sigma = 0.01;
    c.varpi = 2e-3;
    const Section7Simulator sim(c);
    REQUIRE(sim.aggregated());
    for (std::uint64_t p = 0; p < 4; ++p) {
      const DensityCurveState a = sim.curves_aggregated(p);
      const DensityCurveState s = sim.curves_stepwise(p);
      double worst = 0.0;
      for (std::size_t i = 0; i < a.alpha.size(); ++i)
        worst = std::max(worst, std::abs(a.alpha[i] - s.alpha[i]) / std::max(1e-300, std::abs(s.alpha[i])));
      CHECK(worst < 1e-10);
      CHECK(sim.price(p).price == doctest::Approx(
                                      price_pre_default_independent(c.t, c.T, s.theta, s.alpha, c.R, c.r,
                                                                    s.survival.back()))
                                      .epsilon(1e-12));
    }
  }
}

TEST_CASE("results do not depend on the worker count") {
  ExperimentConfig c = small(300);
  c.lambda_bar = 0.3;
  c.workers = 1;
  const PriceDistribution one = run_price_distribution(c);
  c.workers = 4;
  const PriceDistribution four = run_price_distribution(c);
  CHECK(one.prices == four.prices);
  CHECK(one.paths == four.paths);
  CHECK(one.flagged == four.flagged);
  c.workers = 3;
  CHECK(run_price_distribution(c).prices == one.prices);
}

TEST_CASE("prices lie between the recovery floor and the default-free bond") {
  ExperimentConfig c = small(500);
  c.lambda_bar = 0.3;
  const PriceDistribution d = run_price_distribution(c);
  const double B = constant_rate_discount(c.r, c.t, c.T);
  for (std::size_t i = 0; i < d.prices.size(); ++i) {
    if (d.flagged[i]) continue;
    CHECK(d.prices[i] >= c.R * B - 1e-12);
    CHECK(d.prices[i] <= B + 1e-12);
  }
}

TEST_CASE("jumps add right skew") {
  ExperimentConfig c = small(2000);
  c.lambda_bar = 0.3;
  const auto rows = sweep(c, SweepAxis::Varpi, {0.0, 2e-3});
  MESSAGE("skewness at varpi 0: " << rows[0].skewness << ", at 2e-3: " << rows[1].skewness);
  CHECK(rows[1].skewness > rows[0].skewness);
}

TEST_CASE("sample statistics") {
  const SampleStats s = sample_stats({1.0, 2.0, 3.0, 10.0});
  CHECK(s.mean == 4.0);
  CHECK(s.sd == doctest::Approx(std::sqrt(50.0 / 3.0)).epsilon(1e-14));
  CHECK(s.se == doctest::Approx(std::sqrt(50.0 / 3.0) / 2.0).epsilon(1e-14));
  CHECK(s.skewness > 0.0);
  CHECK(tail_mass_above({1.0, 2.0, 3.0, 10.0}, 2.0) == 0.5);
}

TEST_CASE("martingale harness on the density") {
  ExperimentConfig c = small(2000);
  const auto cells = density_martingale_check(c, {0.6, 1.0, 5.0});
  for (const auto& cell : cells) {
    CHECK(cell.initial == doctest::Approx(0.1 * std::exp(-0.1 * cell.theta)).epsilon(1e-14));
    CHECK(cell.within(3.0));
  }
}

TEST_CASE("sweep cells use decorrelated seeds and validate input") {
  ExperimentConfig c = small(50);
  c.lambda_bar = 0.3;
  const auto rows = sweep(c, SweepAxis::Lambda, {0.3, 0.3});
  CHECK(rows[0].mean != rows[1].mean);
  CHECK_THROWS_AS(sweep(c, SweepAxis::Varpi, {2e-3, 1e-3}), std::invalid_argument);
  CHECK(parse_sweep_axis("T") == SweepAxis::T);
  CHECK(to_string(SweepAxis::Varpi) == "varpi");
  c.n_paths = 0;
  CHECK_THROWS_WITH_AS(c.validate(), "[experiment] n_paths: positive integer required", std::invalid_argument);
}

}
