#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>

#include "lrf/cli.hpp"

using namespace lrf;

TEST_SUITE("cli") {

TEST_CASE("empty config gives the defaults") {
  const LabConfig c = parse_config_text("");
  CHECK(c == LabConfig{});
  CHECK(c.model.lambda_bar == 0.1);
  CHECK(resolve_theta_max(c.model.theta_max_rule, c.model.lambda_bar) == 100.0);
  const ExperimentConfig e = build_experiment(c);
  CHECK(make_theta_grid(e.delta, resolve_theta_max(e.theta_max_rule, e.lambda_bar)).size() == 10001);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config round trip") {
  LabConfig c;
  c.model.sigma = 0.0123456789012345;
  c.levy_measure.varpi = 2e-4;
  c.rates.vasicek_formula = "paper_exact";
  c.pide.picard_mode = true;
  c.experiment.sweep_axis = "varpi";
  c.experiment.sweep_values = {0.0, 2e-4, 1e-3};
  c.experiment.seed = 987654321012345ULL;
  c.pricing.recovery_type = "intensity_linked";
  c.pricing.f = "none";
  c.pide.x_range = {-0.1, 0.2};
  c.pricing.w0 = 0.25;
  c.pricing.w1 = 0.5;
  const LabConfig back = parse_config_text(serialize_config(c));
  CHECK(back == c);
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c) != config_hash(LabConfig{}));
  CHECK(config_hash(c).size() == 16);
}

TEST_CASE("documented keys") {
  const LabConfig c = parse_config_text(
      "[kernel]\ntype = riesz\nh = 0.8\n[levy_measure]\ntype = point_mass\nz = 0.002\n"
      "[model]\ndelta_theta = 0.02\njump_sign_convention = section3\n"
      "[rates]\nmode = vasicek_jumps\nr = 0.03\nrho0 = 0.02\nphi = 0.5\nrates_correlated = true\n"
      "[pide]\nx_range = -0.1, 0.2\ny_range = 0, 0.5\n"
      "[pricing]\nregime = correlated\nrecovery_type = intensity_linked\nw0 = 0.3\nw1 = 0.2\nf = identity\n");
  CHECK(c.kernel.type == "riesz");
  CHECK(c.kernel.h == 0.8);
  CHECK(c.model.delta_theta == 0.02);
  CHECK(c.rates.r == 0.03);
  CHECK(c.pide.y_range == std::vector<double>{0.0, 0.5});
  const KernelModel m = build_kernel_model(c);
  CHECK(m.pide.x_min == -0.1);
  CHECK(m.pide.y_max == 0.5);
  CHECK(m.rates.phi(0.0, 1.0) == 0.5);
  LabConfig v = c;
  v.rates.mode = "vasicek";
  CHECK(build_rates(v).phi(0.0, 1.0) == 0.0);
}

TEST_CASE("comments and whitespace") {
  const LabConfig c = parse_config_text("# header\n[model]\n  sigma = 0.002   # inline\n\n[experiment]\nseed=5\n");
  CHECK(c.model.sigma == 0.002);
  CHECK(c.experiment.seed == 5);
}

TEST_CASE("invalid configs are rejected with the offending key") {
  CHECK_THROWS_WITH_AS(parse_config_text("[levy_measure]\nzeta = -1\n").validate(),
                       "[levy_measure] zeta: positive real required", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[pricing]\nrecovery_type = intensity_linked\nw0 = 0.6\nw1 = 0.6\n").validate(),
                       "[pricing] w0+w1 ≤ 1 violated", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[model]\nfoo = 1\n"), "[model] foo: unknown key", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[nowhere]\n"), "[nowhere]: unknown section", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[pide]\nx_range = 0.1\n"),
                       "[pide] x_range: two values lo, hi with lo < hi required", std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[pricing]\nregime = correlated\n"),
                       "[rates] rates_correlated: must be true exactly when [pricing] regime = correlated",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_config_text("[rates]\nrates_correlated = true\n"),
                       "[rates] rates_correlated: needs mode = vasicek or vasicek_jumps", std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model]\nsigma = abc\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_config_text("[model]\nsigma = 1\nsigma = 2\n"), std::invalid_argument);
}

TEST_CASE("seed precedence") {
  CHECK(resolve_seed(1, nullptr, std::nullopt) == 1);
  CHECK(resolve_seed(1, "22", std::nullopt) == 22);
  CHECK(resolve_seed(1, "22", 333) == 333);
  CHECK_THROWS_AS(resolve_seed(1, "x1", std::nullopt), std::invalid_argument);
}

TEST_CASE("run manifest") {
  RunManifest m;
  m.config_hash = config_hash(LabConfig{});
  m.seed = 7;
  m.command = "price";
  m.started_at = utc_now();
  m.finished_at = utc_now();
  m.outputs = {"prices.csv"};
  const auto dir = std::filesystem::temp_directory_path() / "lrf_manifest_test";
  std::filesystem::create_directories(dir);
  m.write(dir);
  std::ifstream in(dir / "manifest.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j.at("seed") == 7);
  CHECK(j.at("config_hash") == m.config_hash);
  CHECK(j.at("version") == kVersionTag);
  CHECK(j.at("outputs").size() == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("verify on the default config") {
  LabConfig c;
  c.experiment.n_paths = 2000;
  const VerifyReport r = run_verify(c);
  bool baseline = false;
  for (const auto& e : r.entries) {
    if (e.name == "deterministic_baseline") baseline = e.status == "pass";
    CHECK(e.status != "fail");
  }
  CHECK(baseline);
  CHECK(nlohmann::json::parse(r.to_json()).size() == r.entries.size());
}

TEST_CASE("builders follow the config") {
  LabConfig c;
  c.kernel.type = "riesz";
  c.kernel.nodes = 5;
  const FieldIncrementPlan p = build_field_plan(c, 0.01);
  CHECK(p.size() == 5);
  c = LabConfig{};
  CHECK(build_field_plan(c, 0.01).size() == 1);
  c.levy_measure.type = "none";
  CHECK(build_levy_measure(c).is_null());
}

}
