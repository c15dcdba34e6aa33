#include "lrf/rates.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lrf {

VasicekSpec VasicekSpec::constant_loading(double kappa, double delta, double r0, double rho0) {
  VasicekSpec spec;
  spec.kappa = kappa;
  spec.delta = delta;
  spec.r0 = r0;
  spec.rho = [rho0](double, double) { return rho0; };
  return spec;
}

void VasicekSpec::validate() const {
  if (!(kappa > 0.0)) throw std::invalid_argument("[rates] kappa: positive real required");
  if (!(delta > 0.0)) throw std::invalid_argument("[rates] delta: positive real required");
}

VasicekFormula parse_vasicek_formula(const std::string& name) {
  if (name == "standard") return VasicekFormula::Standard;
  if (name == "paper_exact") return VasicekFormula::PaperExact;
  throw std::invalid_argument("[rates] vasicek_formula: expected standard or paper_exact");
}

std::string to_string(VasicekFormula f) { return f == VasicekFormula::Standard ? "standard" : "paper_exact"; }

namespace {

std::vector<double> on_nodes(const std::function<double(double, double)>& f, const FieldIncrementPlan& plan,
                             double t) {
  std::vector<double> out(plan.size());
  for (std::size_t q = 0; q < plan.size(); ++q) out[q] = f(t, plan.xi_nodes[q]);
  return out;
}

} // namespace

double evolve_rate(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan, const LevyMeasure& measure,
                   double t, double dt, const StepNoise& shared, RandomStream& residual) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  const double k = spec.kappa;
  const double decay = std::exp(-k * dt);
  const double one_minus = -std::expm1(-k * dt);
  double next = r * decay + spec.delta * one_minus;

  const auto rho = on_nodes(spec.rho, plan, t);
  bool any_rho = false;
  for (double v : rho) any_rho = any_rho || v != 0.0;
  if (any_rho) {
    // OU integral = c * (field increment) + orthogonal residual.
    const double c = one_minus / (k * dt);
    const double var_total = -std::expm1(-2.0 * k * dt) / (2.0 * k);
    const double var_res = std::max(0.0, var_total - c * c * dt);
    Eigen::VectorXd z(static_cast<Eigen::Index>(plan.size()));
    for (Eigen::Index q = 0; q < z.size(); ++q) z(q) = residual.normal();
    Eigen::VectorXd res = plan.kernel_cholesky.triangularView<Eigen::Lower>() * z;
    res *= std::sqrt(var_res);
    for (std::size_t q = 0; q < plan.size(); ++q) {
      const auto qi = static_cast<Eigen::Index>(q);
      next += rho[q] * (c * shared.field(qi) + res(qi));
    }
  }

  if (!measure.is_null()) {
    double jumps = 0.0;
    for (const Jump& j : shared.jumps) jumps += std::exp(-k * (t + dt - j.time)) * spec.phi(t, j.mark);
    const double comp = measure.integrate([&](double xi) { return spec.phi(t, xi); });
    next += jumps - one_minus / k * comp;
  }
  return next;
}

double evolve_rate(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan, const LevyMeasure& measure,
                   double t, double dt, PathStreams& streams, RandomStream& residual) {
  return evolve_rate(r, spec, plan, measure, t, dt, draw_step_noise(plan, measure, t, dt, streams), residual);
}

double rate_a11(const VasicekSpec& spec, const FieldIncrementPlan& plan, double t) {
  const auto rho = on_nodes(spec.rho, plan, t);
  return 0.5 * kernel_quadratic_form(plan.weighted_kernel, rho, rho);
}

RateMoments rate_step_moments(double r, const VasicekSpec& spec, const FieldIncrementPlan& plan,
                              const LevyMeasure& measure, double dt) {
  const double k = spec.kappa;
  RateMoments m;
  m.mean = r * std::exp(-k * dt) + spec.delta * -std::expm1(-k * dt);
  const double per_time = 2.0 * rate_a11(spec, plan, 0.0) +
                          (measure.is_null() ? 0.0 : measure.integrate([&](double xi) {
                            const double p = spec.phi(0.0, xi);
                            return p * p;
                          }));
  m.variance = per_time * -std::expm1(-2.0 * k * dt) / (2.0 * k);
  return m;
}

double zcb_closed_form(const VasicekSpec& spec, const FieldIncrementPlan& plan, double t, double T, double r,
                       VasicekFormula formula) {
  spec.validate();
  if (T < t) throw std::invalid_argument("maturity before valuation time");
  const double tau = T - t;
  if (tau == 0.0) return 1.0;
  const double k = spec.kappa;
  const double b_k = -std::expm1(-k * tau) / k;
  const double denom = formula == VasicekFormula::Standard ? k : k * k;
  // Composite Simpson for int_t^T a11(u) g(u)^2 du.
  const int n = 400;
  const double h = tau / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = t + i * h;
    const double g = -std::expm1(-k * (T - u)) / denom;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * rate_a11(spec, plan, u) * g * g;
  }
  acc *= h / 3.0;
  return std::exp(b_k * (spec.delta - r) - spec.delta * tau + acc);
}

double constant_rate_discount(double r, double t, double T) {
  if (T < t) throw std::invalid_argument("maturity before valuation time");
  return std::exp(-r * (T - t));
}

std::string VasicekAdjudication::summary() const {
  std::ostringstream os;
  os.precision(8);
  os << "vasicek adjudication: mc=" << mc_mean << " se=" << mc_se << " standard=" << standard
     << (standard_within ? " (inside 3se)" : " (outside 3se)") << " paper_exact=" << paper_exact
     << (paper_exact_within ? " (inside 3se)" : " (outside 3se)") << " selected=" << to_string(selected);
  return os.str();
}

VasicekAdjudication adjudicate_vasicek_formula(const VasicekSpec& spec, const FieldIncrementPlan& plan, double T,
                                               std::size_t n_paths, std::uint64_t seed, double dt) {
  spec.validate();
  const auto steps = static_cast<std::size_t>(std::llround(T / dt));
  const double h = T / static_cast<double>(steps);
  FieldIncrementPlan step_plan = plan;
  step_plan.time_step = h;
  const LevyMeasure none = LevyMeasure::none();
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t p = 0; p < n_paths; ++p) {
    PathStreams streams(seed, p);
    RandomStream residual(seed, p, Channel::RateResidual);
    double r = spec.r0, integral = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double next = evolve_rate(r, spec, step_plan, none, static_cast<double>(k) * h, h, streams, residual);
      integral += 0.5 * h * (r + next);
      r = next;
    }
    const double d = std::exp(-integral);
    sum += d;
    sum2 += d * d;
  }
  const double n = static_cast<double>(n_paths);
  VasicekAdjudication out;
  out.mc_mean = sum / n;
  out.mc_se = std::sqrt(std::max(0.0, sum2 / n - out.mc_mean * out.mc_mean) / (n - 1.0));
  out.standard = zcb_closed_form(spec, plan, 0.0, T, spec.r0, VasicekFormula::Standard);
  out.paper_exact = zcb_closed_form(spec, plan, 0.0, T, spec.r0, VasicekFormula::PaperExact);
  out.standard_within = std::abs(out.standard - out.mc_mean) <= 3.0 * out.mc_se;
  out.paper_exact_within = std::abs(out.paper_exact - out.mc_mean) <= 3.0 * out.mc_se;
  if (out.paper_exact_within && !out.standard_within) out.selected = VasicekFormula::PaperExact;
  return out;
}

} // namespace lrf
