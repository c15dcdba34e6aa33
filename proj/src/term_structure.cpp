#include "lrf/term_structure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrf {

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }

const ExponentialDensity* exponential_form(const LevyMeasure& measure) {
  return std::get_if<ExponentialDensity>(&measure.form());
}

} // namespace

CoefficientSpec CoefficientSpec::section7(double sigma, double b, double lambda_bar) {
  CoefficientSpec spec;
  spec.separable = SeparableForms{sigma, b};
  spec.sigma = [sigma](double t, double theta, double) { return sigma * pos(theta - t); };
  spec.gamma = [b](double t, double theta, double xi) { return xi > 0.0 ? b * pos(theta - t) * xi : 0.0; };
  spec.lambda0 = [lambda_bar](double) { return lambda_bar; };
  return spec;
}

CoefficientSpec CoefficientSpec::general(Field sigma, Field gamma, std::function<double(double)> lambda0,
                                         double quadrature_step) {
  CoefficientSpec spec;
  spec.sigma = std::move(sigma);
  spec.gamma = std::move(gamma);
  spec.lambda0 = std::move(lambda0);
  spec.quadrature_step = quadrature_step;
  return spec;
}

CumulativeIntegrals cumulative_integrals(const CoefficientSpec& spec, double t, double theta, double xi) {
  if (theta < 0.0) throw std::invalid_argument("theta must be nonnegative");
  if (theta == 0.0) return {};
  if (spec.separable) {
    const double s = pos(theta - t);
    const double half_s2 = 0.5 * s * s;
    return {spec.separable->sigma * half_s2, xi > 0.0 ? spec.separable->b * xi * half_s2 : 0.0};
  }
  const auto n = static_cast<int>(std::max(1.0, std::ceil(theta / spec.quadrature_step - 1e-9)));
  const double h = theta / n;
  CumulativeIntegrals out;
  for (int k = 0; k <= n; ++k) {
    const double v = k * h;
    const double w = (k == 0 || k == n) ? 0.5 * h : h;
    out.sigma += w * spec.sigma(t, v, xi);
    out.gamma += w * spec.gamma(t, v, xi);
  }
  return out;
}

double mc_drift(const CoefficientSpec& spec, const FieldIncrementPlan& field, const LevyMeasure& measure, double t,
                double theta, DriftEvaluation how) {
  const std::size_t n = field.size();
  std::vector<double> sig(n), isig(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = field.xi_nodes[k];
    sig[k] = spec.sigma(t, theta, xi);
    isig[k] = cumulative_integrals(spec, t, theta, xi).sigma;
  }
  double mu = n ? kernel_quadratic_form(field.weighted_kernel, sig, isig) : 0.0;

  if (measure.is_null()) return mu;
  const auto* expo = exponential_form(measure);
  if (how == DriftEvaluation::Auto && spec.separable && expo) {
    const double s = pos(theta - t);
    const double gamma_bar = spec.separable->b * s * s * 0.5;
    const double v = expo->varpi;
    const double q = 1.0 + v * gamma_bar;
    mu += expo->zeta * spec.separable->b * s * (v - v / (q * q));
    return mu;
  }
  mu += measure.integrate([&](double xi) {
    const double ig = cumulative_integrals(spec, t, theta, xi).gamma;
    return spec.gamma(t, theta, xi) * -std::expm1(-ig);
  });
  return mu;
}

double jump_compensator_rate(const CoefficientSpec& spec, const LevyMeasure& measure, double t, double theta,
                             DriftEvaluation how) {
  if (measure.is_null()) return 0.0;
  const auto* expo = exponential_form(measure);
  if (how == DriftEvaluation::Auto && spec.separable && expo)
    return spec.separable->b * pos(theta - t) * expo->zeta * expo->varpi;
  return measure.integrate([&](double xi) { return spec.gamma(t, theta, xi); });
}

// ---------------------------------------------------------------------------

std::vector<double> make_theta_grid(double delta, double theta_max) {
  if (!(delta > 0.0) || !(theta_max > 0.0)) throw std::invalid_argument("theta grid needs positive step and extent");
  const auto n = static_cast<std::size_t>(std::llround(theta_max / delta));
  std::vector<double> grid(n + 1);
  for (std::size_t i = 0; i <= n; ++i) grid[i] = static_cast<double>(i) * delta;
  return grid;
}

double resolve_theta_max(const std::string& rule, double lambda_bar) {
  const auto slash = rule.find('/');
  if (slash != std::string::npos) {
    const std::string head = rule.substr(0, slash);
    const std::string tail = rule.substr(slash + 1);
    if (tail != "lambda" && tail != "lambda_bar")
      throw std::invalid_argument("[model] theta_max_rule: expected K/lambda or a number");
    if (!(lambda_bar > 0.0)) throw std::invalid_argument("[model] lambda_bar: positive real required");
    return std::stod(head) / lambda_bar;
  }
  const double v = std::stod(rule);
  if (!(v > 0.0)) throw std::invalid_argument("[model] theta_max_rule: positive real required");
  return v;
}

ForwardCurveState ForwardCurveState::initial(const CoefficientSpec& spec, std::vector<double> theta,
                                             std::uint64_t seed, std::uint64_t path) {
  ForwardCurveState state;
  state.lambda.resize(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) state.lambda[i] = spec.lambda0(theta[i]);
  state.theta = std::move(theta);
  state.seed = seed;
  state.path = path;
  return state;
}

IntensityModel::IntensityModel(CoefficientSpec spec, FieldIncrementPlan field, LevyMeasure measure,
                               std::vector<double> theta, double horizon, IntensityOptions options)
    : spec_(std::move(spec)),
      field_(std::move(field)),
      measure_(std::move(measure)),
      theta_(std::move(theta)),
      options_(options) {
  if (!measure_.finite_activity()) throw std::domain_error("finite-activity required");
  const double dt = field_.time_step;
  steps_ = static_cast<std::size_t>(std::llround(horizon / dt));
  const std::size_t m = theta_.size();
  const std::size_t nodes = field_.size();
  drift_.resize(steps_ * m);
  comp_.resize(steps_ * m);
  sigma_nodes_.resize(steps_ * m * nodes);
  for (std::size_t k = 0; k < steps_; ++k) {
    const double t = static_cast<double>(k) * dt;
    for (std::size_t i = 0; i < m; ++i) {
      const std::size_t c = k * m + i;
      drift_[c] = options_.drift_scale * mc_drift(spec_, field_, measure_, t, theta_[i], options_.drift_evaluation);
      comp_[c] = jump_compensator_rate(spec_, measure_, t, theta_[i], options_.drift_evaluation);
      for (std::size_t q = 0; q < nodes; ++q) sigma_nodes_[c * nodes + q] = spec_.sigma(t, theta_[i], field_.xi_nodes[q]);
    }
  }
}

std::size_t IntensityModel::step_index(double t) const {
  const auto k = static_cast<long long>(std::llround(t / dt()));
  if (k < 0 || static_cast<std::size_t>(k) >= steps_) throw std::out_of_range("time outside the precomputed horizon");
  return static_cast<std::size_t>(k);
}

StepNoise draw_step_noise(const FieldIncrementPlan& field, const LevyMeasure& measure, double t, double dt,
                          PathStreams& streams) {
  return {draw_field(field, streams.gaussian), sample_jumps(measure, t, dt, streams)};
}

ForwardCurveState evolve_intensity(const ForwardCurveState& state, const IntensityModel& model,
                                   const StepNoise& noise) {
  const double dt = model.dt();
  const std::size_t k = model.step_index(state.t);
  const std::size_t nodes = model.field().size();
  const auto& spec = model.spec();
  ForwardCurveState next = state;
  next.t = state.t + dt;
  for (std::size_t i = 0; i < state.theta.size(); ++i) {
    const double theta = state.theta[i];
    double d = model.drift(k, i) * dt - model.compensator(k, i) * dt;
    const double* sig = model.sigma_on_nodes(k, i);
    for (std::size_t q = 0; q < nodes; ++q) d += sig[q] * noise.field(static_cast<Eigen::Index>(q));
    for (const Jump& j : noise.jumps) d += spec.gamma(state.t, theta, j.mark);
    double v = state.lambda[i] + d;
    if (v < 0.0) {
      ++next.negative_count;
      if (model.options().clamp_lambda_at_zero) v = 0.0;
    }
    next.lambda[i] = v;
  }
  return next;
}

ForwardCurveState evolve_intensity(const ForwardCurveState& state, const IntensityModel& model,
                                   PathStreams& streams) {
  return evolve_intensity(state, model, draw_step_noise(model.field(), model.measure(), state.t, model.dt(), streams));
}

std::vector<double> csp(const ForwardCurveState& state) {
  const auto& th = state.theta;
  std::vector<double> s(th.size());
  if (th.empty()) return s;
  double acc = 0.0;
  s[0] = 1.0;
  for (std::size_t i = 1; i < th.size(); ++i) {
    acc += 0.5 * (th[i] - th[i - 1]) * (state.lambda[i] + state.lambda[i - 1]);
    if (!std::isfinite(acc)) throw std::overflow_error("non-finite intensity integral");
    if (acc < -700.0) throw std::overflow_error("survival overflow: runaway negative intensity");
    s[i] = std::exp(-acc);
  }
  return s;
}

std::vector<double> density(const ForwardCurveState& state) {
  auto s = csp(state);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= state.lambda[i];
  return s;
}

// ---------------------------------------------------------------------------

Section7Dynamics::Section7Dynamics(double sigma, double b, double zeta, double varpi, JumpSign sign,
                                   DensityScheme scheme, int quadrature_nodes)
    : sigma_(sigma),
      b_(b),
      zeta_(zeta),
      varpi_(varpi),
      sign_(sign),
      scheme_(scheme),
      measure_(ExponentialDensity{zeta, varpi}, quadrature_nodes) {
  if (sigma < 0.0) throw std::invalid_argument("[model] sigma: nonnegative real required");
  if (b < 0.0) throw std::invalid_argument("[model] b: nonnegative real required");
}

CoefficientSpec Section7Dynamics::coefficient_spec(double lambda_bar) const {
  return CoefficientSpec::section7(sigma_, b_, lambda_bar);
}

DensityNoise draw_density_noise(const Section7Dynamics& dynamics, double t, double dt, PathStreams& streams) {
  DensityNoise noise;
  noise.dW = std::sqrt(dt) * streams.gaussian.normal();
  noise.jumps = sample_jumps(dynamics.measure(), t, dt, streams);
  return noise;
}

DensityCurveState DensityCurveState::flat(std::vector<double> theta, double lambda_bar) {
  DensityCurveState state;
  const std::size_t n = theta.size();
  state.alpha.resize(n);
  state.survival.resize(n);
  state.lambda.assign(n, lambda_bar);
  for (std::size_t i = 0; i < n; ++i) {
    state.survival[i] = std::exp(-lambda_bar * theta[i]);
    state.alpha[i] = lambda_bar * state.survival[i];
  }
  state.theta = std::move(theta);
  return state;
}

DensityCurveState DensityCurveState::from_intensity(const ForwardCurveState& fc) {
  DensityCurveState state;
  state.t = fc.t;
  state.theta = fc.theta;
  state.lambda = fc.lambda;
  state.survival = csp(fc);
  state.alpha.resize(fc.theta.size());
  for (std::size_t i = 0; i < fc.theta.size(); ++i) state.alpha[i] = state.survival[i] * fc.lambda[i];
  return state;
}

double interpolate_uniform(const std::vector<double>& grid, const std::vector<double>& values, double x) {
  if (grid.size() < 2) return values.empty() ? 0.0 : values.front();
  const double h = grid[1] - grid[0];
  double u = (x - grid.front()) / h;
  if (u <= 0.0) return values.front();
  const auto last = grid.size() - 1;
  if (u >= static_cast<double>(last)) return values.back();
  auto j = static_cast<std::size_t>(u);
  // snap to a node when x is a grid point up to round-off
  if (std::abs(u - std::round(u)) < 1e-9) return values[static_cast<std::size_t>(std::llround(u))];
  const double w = u - static_cast<double>(j);
  return (1.0 - w) * values[j] + w * values[j + 1];
}

namespace {

void euler_step(const DensityCurveState& state, DensityCurveState& next, const Section7Dynamics& dyn, double dt,
                const DensityNoise& noise) {
  const double sgn = dyn.sign_factor();
  const double zeta = dyn.measure().is_null() ? 0.0 : dyn.zeta();
  const double varpi = dyn.varpi();
  const std::size_t n = state.theta.size();
  std::vector<double> dm(n), dM(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = pos(state.theta[i] - state.t);
    const double gam = dyn.b() * s;
    const double big_gamma = 0.5 * dyn.b() * s * s;
    double jump = 0.0;
    for (const Jump& j : noise.jumps) jump += gam * j.mark * std::exp(-j.mark * big_gamma);
    const double q = 1.0 + varpi * big_gamma;
    jump -= dt * zeta * gam * varpi / (q * q);
    dm[i] = -dyn.sigma() * s * noise.dW + sgn * jump;
  }
  // M(theta) = int_0^theta m(u) du by the trapezoid rule on the grid
  dM[0] = 0.0;
  for (std::size_t i = 1; i < n; ++i) dM[i] = dM[i - 1] + 0.5 * (state.theta[i] - state.theta[i - 1]) * (dm[i] + dm[i - 1]);
  for (std::size_t i = 0; i < n; ++i) {
    next.alpha[i] = state.alpha[i] * (1.0 + dM[i]) - state.survival[i] * dm[i];
    next.survival[i] = state.survival[i] * (1.0 + dM[i]);
    next.lambda[i] = next.survival[i] != 0.0 ? next.alpha[i] / next.survival[i] : 0.0;
  }
  next.azema.stochastic_exp *= 1.0 + interpolate_uniform(state.theta, dM, state.t);
}

// Product-form step, exact for coefficients frozen over the step. lambda and
// log S are updated additively; alpha = S lambda is a discrete martingale.
void exponential_step(const DensityCurveState& state, DensityCurveState& next, const Section7Dynamics& dyn, double dt,
                      const DensityNoise& noise) {
  const double sgn = dyn.sign_factor();
  const double zeta = dyn.measure().is_null() ? 0.0 : dyn.zeta();
  const double varpi = dyn.varpi();
  const bool s7 = dyn.sign() == JumpSign::Section7;
  const std::size_t n = state.theta.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = pos(state.theta[i] - state.t);
    if (s == 0.0) {
      next.lambda[i] = state.lambda[i];
      next.survival[i] = state.survival[i];
      next.alpha[i] = state.alpha[i];
      continue;
    }
    const double sig = dyn.sigma() * s;
    const double i_sigma = 0.5 * sig * s;
    const double gam = dyn.b() * s;
    const double big_gamma = 0.5 * gam * s;
    const double q = 1.0 + varpi * big_gamma;
    double dl = sig * noise.dW + sig * i_sigma * dt + sgn * dt * zeta * gam * varpi / (q * q);
    double dlog = -i_sigma * noise.dW - 0.5 * i_sigma * i_sigma * dt - sgn * dt * zeta * varpi * big_gamma / q;
    for (const Jump& j : noise.jumps) {
      const double x = j.mark * big_gamma;
      if (s7) {
        const double e = std::exp(-x);
        dl -= gam * j.mark * e / (2.0 - e);
        dlog += std::log(2.0 - e);
      } else {
        dl += gam * j.mark;
        dlog -= x;
      }
    }
    next.lambda[i] = state.lambda[i] + dl;
    next.survival[i] = state.survival[i] * std::exp(dlog);
    next.alpha[i] = next.survival[i] * next.lambda[i];
  }
  // On the diagonal s = 0, so dM_t(t) = 0 for these coefficients.
}

} // namespace

DensityCurveState evolve_density_direct(const DensityCurveState& state, const Section7Dynamics& dyn, double dt,
                                        const DensityNoise& noise) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  DensityCurveState next = state;
  next.t = state.t + dt;
  next.azema.integral_lambda += dt * interpolate_uniform(state.theta, state.lambda, state.t);
  if (dyn.scheme() == DensityScheme::Euler)
    euler_step(state, next, dyn, dt, noise);
  else
    exponential_step(state, next, dyn, dt, noise);
  for (std::size_t i = 0; i < next.theta.size(); ++i) {
    if (next.alpha[i] < 0.0) ++next.negative_alpha_count;
    if (i > 0 && next.survival[i] > next.survival[i - 1]) ++next.nonmonotone_count;
  }
  return next;
}

DensityCurveState evolve_density_direct(const DensityCurveState& state, const Section7Dynamics& dyn, double dt,
                                        PathStreams& streams) {
  return evolve_density_direct(state, dyn, dt, draw_density_noise(dyn, state.t, dt, streams));
}

AzemaResult azema_survival(const DensityCurveState& state) {
  AzemaResult out;
  out.survival = interpolate_uniform(state.theta, state.survival, state.t);
  out.residual = std::abs(out.survival - std::exp(-state.azema.integral_lambda) * state.azema.stochastic_exp);
  return out;
}

bool immersion_holds(const CoefficientSpec& spec, const std::vector<double>& xi_nodes, double tolerance,
                     double horizon, int samples) {
  const std::vector<double> xs = xi_nodes.empty() ? std::vector<double>{0.0, 1.0} : xi_nodes;
  for (int a = 0; a < samples; ++a) {
    const double theta = horizon * a / samples;
    for (int c = 1; c <= samples; ++c) {
      const double t = theta + horizon * c / samples;
      for (double xi : xs) {
        if (std::abs(spec.sigma(t, theta, xi)) > tolerance) return false;
        if (std::abs(spec.gamma(t, theta, xi)) > tolerance) return false;
      }
    }
  }
  return true;
}

} // namespace lrf
