#pragma once

// Configuration file, run manifest and the verify report used by the `lab`
// tool. Config format: `[section]` headers, `key = value` lines, `#` comments.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lrf/experiments.hpp"
#include "lrf/levy_field.hpp"
#include "lrf/pide.hpp"
#include "lrf/pricing.hpp"
#include "lrf/rates.hpp"
#include "lrf/term_structure.hpp"

namespace lrf {

struct KernelSection {
  std::string type = "dirac";  // dirac | riesz | fractional
  double c0 = 1.0;
  double alpha = 0.5;
  double h = 0.75;
  double cutoff = 0.0;
  int nodes = 1;  // field nodes for the non-Dirac forms
  double xi_min = 0.0;
  double xi_max = 1.0;
  bool operator==(const KernelSection&) const = default;
};

struct LevyMeasureSection {
  std::string type = "exponential";  // exponential | point_mass | none
  double zeta = 10.0;
  double varpi = 1e-3;
  double z = 1e-3;
  int quadrature_nodes = 32;
  bool operator==(const LevyMeasureSection&) const = default;
};

struct ModelSection {
  double sigma = 0.001;
  double b = 1.0;
  double lambda_bar = 0.1;
  double delta_theta = 0.01;
  double delta_t = 0.01;
  std::string theta_max_rule = "10/lambda";
  std::string jump_sign_convention = "section7";  // section7 | section3
  std::string density_scheme = "exponential";  // exponential | euler
  bool clamp_lambda_at_zero = false;
  std::string drift_evaluation = "auto";  // auto | quadrature
  bool operator==(const ModelSection&) const = default;
};

struct RatesSection {
  std::string mode = "constant";  // constant | vasicek | vasicek_jumps
  double r = 0.05;  // constant rate of the independent regime
  double kappa = 0.5;
  double delta = 0.05;
  double r0 = 0.05;
  double rho0 = 0.01;
  double phi = 0.0;  // jump loading, vasicek_jumps only
  std::string vasicek_formula = "standard";
  bool rates_correlated = false;  // r shares the field draws with lambda
  bool operator==(const RatesSection&) const = default;
};

struct PideSection {
  int nx = 128;
  int ny = 128;
  std::vector<double> x_range = {-0.05, 0.15};  // short rate
  std::vector<double> y_range = {0.0, 0.3};     // intensity
  int n_steps = 200;
  double ridge_eps = 1e-8;
  bool picard_mode = false;
  double time_theta = 0.5;
  std::string delta_hat_sign = "derived";
  std::string jump_compensator = "measure_changed";
  int theta_nodes = 8;
  double theta = 1.5;  // maturity solved by `lab pide`
  bool operator==(const PideSection&) const = default;
};

struct PricingSection {
  std::string regime = "independent";
  std::string recovery_type = "constant";  // constant | intensity_linked
  double R = 0.4;
  double w0 = 0.4;
  double w1 = 0.0;
  std::string f = "identity";  // identity | none (f = 0)
  bool operator==(const PricingSection&) const = default;
};

struct ExperimentSection {
  double t = 0.5;
  double T = 1.0;
  std::size_t n_paths = 10000;
  std::uint64_t seed = 20240601;
  unsigned workers = 1;
  std::string evaluator = "auto";  // auto | aggregated | stepwise
  bool tail = true;
  std::string sweep_axis;  // empty: no sweep
  std::vector<double> sweep_values;
  int kde_points = 512;
  std::uint64_t path = 0;  // path written by `lab simulate`
  bool operator==(const ExperimentSection&) const = default;
};

struct LabConfig {
  KernelSection kernel;
  LevyMeasureSection levy_measure;
  ModelSection model;
  RatesSection rates;
  PideSection pide;
  PricingSection pricing;
  ExperimentSection experiment;
  bool operator==(const LabConfig&) const = default;

  /// Throws std::invalid_argument("[section] key: ...") on the first bad value.
  void validate() const;
};

LabConfig parse_config_text(const std::string& text);
LabConfig parse_config(const std::filesystem::path& path);
std::string serialize_config(const LabConfig& config);

/// Seed precedence: command line, then the LAB_SEED value (if set), then the
/// config file. Throws on a malformed LAB_SEED.
std::uint64_t resolve_seed(std::uint64_t config_seed, const char* env_value, std::optional<std::uint64_t> cli_seed);

/// FNV-1a of the serialized config, 16 hex digits.
std::string config_hash(const LabConfig& config);

// Builders from a validated config.
CorrelationKernel build_kernel(const LabConfig& c);
FieldIncrementPlan build_field_plan(const LabConfig& c, double time_step);
LevyMeasure build_levy_measure(const LabConfig& c);
Section7Dynamics build_dynamics(const LabConfig& c);
VasicekSpec build_rates(const LabConfig& c);
KernelModel build_kernel_model(const LabConfig& c);
RecoveryModel build_recovery(const LabConfig& c);
ExperimentConfig build_experiment(const LabConfig& c);

extern const char* const kVersionTag;

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = kVersionTag;
  std::string started_at;
  std::string finished_at;
  std::string command;
  std::vector<std::string> outputs;

  std::string to_json() const;
  void write(const std::filesystem::path& dir) const;
};

/// UTC timestamp, ISO 8601.
std::string utc_now();

struct VerifyEntry {
  std::string name;
  std::string status;  // pass | fail | warn
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  bool all_passed() const;
  std::string to_text() const;
  std::string to_json() const;
};

VerifyReport run_verify(const LabConfig& config);

} // namespace lrf
