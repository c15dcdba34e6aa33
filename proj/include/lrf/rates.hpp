#pragma once

// Extended Vasicek short rate
//   dr = kappa (delta - r) dt + int rho dY^G + int phi dY^P
// with exact Ornstein–Uhlenbeck updates, and the default-free bond.

#include <Eigen/Dense>

#include <functional>
#include <string>

#include "lrf/levy_field.hpp"
#include "lrf/rng.hpp"
#include "lrf/term_structure.hpp"

namespace lrf {

struct VasicekSpec {
  double kappa = 1.0;
  double delta = 0.05;
  double r0 = 0.05;
  std::function<double(double t, double xi)> rho = [](double, double) { return 0.0; };
  std::function<double(double t, double xi)> phi = [](double, double) { return 0.0; };

  /// Constant Gaussian loading rho0, no jumps.
  static VasicekSpec constant_loading(double kappa, double delta, double r0, double rho0);
  void validate() const;
};

enum class VasicekFormula { Standard, PaperExact };

VasicekFormula parse_vasicek_formula(const std::string& name);
std::string to_string(VasicekFormula f);

/// Exact OU step over (t, t + dt]. `shared` carries the field increment and
/// the jumps of the step; when they are shared with the intensity model the
/// rate is correlated with it. The part of the OU integral orthogonal to the
/// field increment is drawn from `residual`.
double evolve_rate(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan, const LevyMeasure& measure,
                   double t, double dt, const StepNoise& shared, RandomStream& residual);

/// Same, drawing its own noise (independent rates).
double evolve_rate(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan, const LevyMeasure& measure,
                   double t, double dt, PathStreams& streams, RandomStream& residual);

struct RateMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Conditional mean and variance of r_{t+dt} given r_t for time-constant
/// loadings.
RateMoments rate_step_moments(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan,
                              const LevyMeasure& measure, double dt);

/// a11(t) = 1/2 int int rho rho c.
double rate_a11(const VasicekSpec& spec, const FieldIncrementPlan& plan, double t);

/// Default-free zero-coupon bond for diffusion-only rates:
/// exp((1 - e^{-kappa tau})/kappa (delta - r) - delta tau + int_t^T a11 g^2 du).
double zcb_closed_form(const VasicekSpec& spec, const FieldIncrementPlan& plan, double t, double T, double r,
                       VasicekFormula formula = VasicekFormula::Standard);

double constant_rate_discount(double r, double t, double T);

struct VasicekAdjudication {
  double standard = 0.0;
  double paper_exact = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  bool standard_within = false;
  bool paper_exact_within = false;
  VasicekFormula selected = VasicekFormula::Standard;
  std::string summary() const;
};

/// Monte Carlo estimate of E[exp(-int_t^T r)] (exact OU steps, trapezoid
/// time integral) compared with both closed-form variants.
VasicekAdjudication adjudicate_vasicek_formula(const VasicekSpec& spec, const FieldIncrementPlan& plan, double T,
                                               std::size_t n_paths, std::uint64_t seed, double dt = 1.0 / 200.0);

} // namespace lrf
