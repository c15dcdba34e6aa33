#pragma once

// Forward-intensity term structure: lambda_t(theta), the survival curve
// S_t(theta) = exp(-int_0^theta lambda_t), the density alpha = S * lambda,
// and the two ways of simulating them (through lambda, or directly through
// the martingale dynamics of alpha).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lrf/levy_field.hpp"
#include "lrf/rng.hpp"

namespace lrf {

/// sigma_t(theta) = sigma (theta - t)^+, gamma_t(theta, xi) = b (theta - t)^+ xi.
struct SeparableForms {
  double sigma = 0.0;
  double b = 0.0;
};

struct CoefficientSpec {
  using Field = std::function<double(double t, double theta, double xi)>;

  Field sigma;
  Field gamma;
  std::function<double(double)> lambda0;
  std::optional<SeparableForms> separable;
  /// Step of the trapezoid rule used for cumulative integrals of
  /// non-separable coefficients.
  double quadrature_step = 0.01;

  static CoefficientSpec section7(double sigma, double b, double lambda_bar);
  static CoefficientSpec general(Field sigma, Field gamma, std::function<double(double)> lambda0,
                                 double quadrature_step = 0.01);
};

struct CumulativeIntegrals {
  double sigma = 0.0;
  double gamma = 0.0;
};

CumulativeIntegrals cumulative_integrals(const CoefficientSpec& spec, double t, double theta, double xi);

enum class DriftEvaluation { Auto, Quadrature };

/// Martingale-condition drift mu_t(theta). The Gaussian part uses the
/// weighted kernel matrix of `field`; the jump part uses a closed form for
/// separable coefficients under the exponential measure, else nu-quadrature.
double mc_drift(const CoefficientSpec& spec, const FieldIncrementPlan& field, const LevyMeasure& measure,
                double t, double theta, DriftEvaluation how = DriftEvaluation::Auto);

/// Compensator rate int gamma_t(theta, xi) nu(dxi).
double jump_compensator_rate(const CoefficientSpec& spec, const LevyMeasure& measure, double t, double theta,
                             DriftEvaluation how = DriftEvaluation::Auto);

// ---------------------------------------------------------------------------

/// Uniform grid 0, delta, ..., theta_max.
std::vector<double> make_theta_grid(double delta, double theta_max);

/// Resolve a `theta_max_rule`: "10/lambda" (or "K/lambda" for any K) against
/// lambda_bar, or a plain number.
double resolve_theta_max(const std::string& rule, double lambda_bar);

struct ForwardCurveState {
  double t = 0.0;
  std::vector<double> theta;
  std::vector<double> lambda;
  std::uint64_t seed = 0;
  std::uint64_t path = 0;
  /// Number of (step, theta) cells where lambda went below zero.
  std::size_t negative_count = 0;

  static ForwardCurveState initial(const CoefficientSpec& spec, std::vector<double> theta,
                                   std::uint64_t seed = 0, std::uint64_t path = 0);
};

struct IntensityOptions {
  double drift_scale = 1.0;  // 1 is the martingale condition; other values are for tests
  bool clamp_lambda_at_zero = false;
  DriftEvaluation drift_evaluation = DriftEvaluation::Auto;
};

/// Shared read-only data of the lambda route: drift and compensator tables on
/// the (t-grid x theta-grid), and the coefficient values on the field nodes.
class IntensityModel {
public:
  IntensityModel(CoefficientSpec spec, FieldIncrementPlan field, LevyMeasure measure, std::vector<double> theta,
                 double horizon, IntensityOptions options = {});

  const CoefficientSpec& spec() const { return spec_; }
  const FieldIncrementPlan& field() const { return field_; }
  const LevyMeasure& measure() const { return measure_; }
  const std::vector<double>& theta() const { return theta_; }
  const IntensityOptions& options() const { return options_; }
  double dt() const { return field_.time_step; }
  std::size_t steps() const { return steps_; }

  std::size_t step_index(double t) const;
  double drift(std::size_t step, std::size_t i) const { return drift_[step * theta_.size() + i]; }
  double compensator(std::size_t step, std::size_t i) const { return comp_[step * theta_.size() + i]; }
  /// sigma_t(theta_i, xi_k) for the nodes of the field plan.
  const double* sigma_on_nodes(std::size_t step, std::size_t i) const {
    return &sigma_nodes_[(step * theta_.size() + i) * field_.size()];
  }

private:
  CoefficientSpec spec_;
  FieldIncrementPlan field_;
  LevyMeasure measure_;
  std::vector<double> theta_;
  IntensityOptions options_;
  std::size_t steps_ = 0;
  std::vector<double> drift_;
  std::vector<double> comp_;
  std::vector<double> sigma_nodes_;
};

struct StepNoise {
  Eigen::VectorXd field;
  std::vector<Jump> jumps;
};

StepNoise draw_step_noise(const FieldIncrementPlan& field, const LevyMeasure& measure, double t, double dt,
                          PathStreams& streams);

/// One Euler step of the forward intensity for every theta, all maturities
/// driven by the same field increment and the same jumps.
ForwardCurveState evolve_intensity(const ForwardCurveState& state, const IntensityModel& model,
                                   const StepNoise& noise);
ForwardCurveState evolve_intensity(const ForwardCurveState& state, const IntensityModel& model,
                                   PathStreams& streams);

/// S_t(theta_i) = exp(-trapezoid int_0^theta_i lambda). Throws
/// std::overflow_error when the integral drops below -700.
std::vector<double> csp(const ForwardCurveState& state);

/// alpha_t(theta_i) = S_t(theta_i) lambda_t(theta_i).
std::vector<double> density(const ForwardCurveState& state);

// ---------------------------------------------------------------------------
// Direct simulation of the density

enum class JumpSign { Section7, Section3 };
enum class DensityScheme { Euler, Exponential };

/// Dynamics of the numerical illustration: white-noise Gaussian part driven by
/// one Brownian motion, separable coefficients, exponential jump measure.
class Section7Dynamics {
public:
  Section7Dynamics(double sigma, double b, double zeta, double varpi, JumpSign sign = JumpSign::Section7,
                   DensityScheme scheme = DensityScheme::Euler, int quadrature_nodes = 32);

  double sigma() const { return sigma_; }
  double b() const { return b_; }
  double zeta() const { return zeta_; }
  double varpi() const { return varpi_; }
  JumpSign sign() const { return sign_; }
  DensityScheme scheme() const { return scheme_; }
  const LevyMeasure& measure() const { return measure_; }
  /// +1 for the sign printed with the numerical illustration, -1 for the
  /// general-section sign.
  double sign_factor() const { return sign_ == JumpSign::Section7 ? 1.0 : -1.0; }
  /// Coefficient spec of the same model (for the lambda route).
  CoefficientSpec coefficient_spec(double lambda_bar) const;

private:
  double sigma_, b_, zeta_, varpi_;
  JumpSign sign_;
  DensityScheme scheme_;
  LevyMeasure measure_;
};

struct DensityNoise {
  double dW = 0.0;
  std::vector<Jump> jumps;
};

DensityNoise draw_density_noise(const Section7Dynamics& dynamics, double t, double dt, PathStreams& streams);

struct AzemaAccumulator {
  double integral_lambda = 0.0;  // int_0^t lambda_s(s) ds, left-point rule
  double stochastic_exp = 1.0;   // Doleans-Dade exponential of M along the diagonal
};

struct DensityCurveState {
  double t = 0.0;
  std::vector<double> theta;
  std::vector<double> alpha;
  std::vector<double> survival;
  std::vector<double> lambda;
  AzemaAccumulator azema;
  std::size_t negative_alpha_count = 0;
  std::size_t nonmonotone_count = 0;

  /// alpha_0 = lambda_bar e^{-lambda_bar theta}.
  static DensityCurveState flat(std::vector<double> theta, double lambda_bar);
  static DensityCurveState from_intensity(const ForwardCurveState& state);
};

/// One step of d alpha = alpha dM - S dm (and dS = S dM) for every theta.
DensityCurveState evolve_density_direct(const DensityCurveState& state, const Section7Dynamics& dynamics, double dt,
                                        const DensityNoise& noise);
DensityCurveState evolve_density_direct(const DensityCurveState& state, const Section7Dynamics& dynamics, double dt,
                                        PathStreams& streams);

struct AzemaResult {
  double survival = 1.0;
  double residual = 0.0;
};

/// S_t = S_t(t) by linear interpolation, plus the residual of the product
/// decomposition e^{-int lambda_s(s) ds} * E(M)_t.
AzemaResult azema_survival(const DensityCurveState& state);

/// True iff sigma and gamma vanish (within tolerance) for every sampled
/// t > theta and every xi in `xi_nodes`.
bool immersion_holds(const CoefficientSpec& spec, const std::vector<double>& xi_nodes, double tolerance,
                     double horizon = 10.0, int samples = 40);

/// Linear interpolation on a uniform grid starting at 0.
double interpolate_uniform(const std::vector<double>& grid, const std::vector<double>& values, double x);

} // namespace lrf
