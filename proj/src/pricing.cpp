#include "lrf/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrf {

RecoveryModel::RecoveryModel(Form form) : form_(std::move(form)) {
  if (const auto* il = std::get_if<IntensityLinkedRecovery>(&form_)) {
    if (il->w0 < 0.0) throw std::invalid_argument("[pricing] w0: nonnegative real required");
    if (il->w1 < 0.0) throw std::invalid_argument("[pricing] w1: nonnegative real required");
    if (il->w0 + il->w1 > 1.0 + 1e-15) throw std::invalid_argument("[pricing] w0+w1 ≤ 1 violated");
  }
}

RecoveryModel RecoveryModel::constant(double R) {
  if (!(R >= 0.0 && R <= 1.0)) throw std::invalid_argument("[pricing] R: value in [0,1] required");
  return RecoveryModel(DeterministicRecovery{[R](double) { return R; }});
}

void RecoveryModel::validate_on(const std::vector<double>& theta) const {
  if (const auto* d = std::get_if<DeterministicRecovery>(&form_)) {
    for (double th : theta) {
      const double v = d->R(th);
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("[pricing] R: value in [0,1] required");
    }
  }
}

Regime parse_regime(const std::string& s) {
  if (s == "independent") return Regime::Independent;
  if (s == "correlated") return Regime::Correlated;
  throw std::invalid_argument("[pricing] regime: expected independent or correlated");
}

PricingState PricingState::from(const DensityCurveState& curves, double r) {
  PricingState s;
  s.t = curves.t;
  s.r = r;
  s.theta = curves.theta;
  s.lambda = curves.lambda;
  s.survival = curves.survival;
  s.alpha = curves.alpha;
  return s;
}

double PricingState::azema() const { return interpolate_uniform(theta, survival, t); }

namespace {

double curve_at(const PricingState& s, const std::vector<double>& v, double theta) {
  return interpolate_uniform(s.theta, v, theta);
}

double breve(double theta, const PricingState& state, const PricingContext& ctx) {
  if (!ctx.solver) throw std::invalid_argument("correlated regime needs a kernel solver");
  const double y = curve_at(state, state.lambda, theta);
  const auto& nodes = ctx.theta_nodes;
  auto at = [&](double th) { return kernel_K_breve(*ctx.solver, state.t, ctx.T, state.r, y, th); };
  if (nodes.empty()) return at(theta);
  if (theta <= nodes.front()) return at(nodes.front());
  if (theta >= nodes.back()) return at(nodes.back());
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), theta);
  const double b = *it, a = *(it - 1);
  const double w = (theta - a) / (b - a);
  return (1.0 - w) * at(a) + w * at(b);
}

double tilde(double theta, const PricingState& state, const PricingContext& ctx, const IntensityLinkedRecovery& il) {
  if (!ctx.solver) throw std::invalid_argument("intensity-linked recovery needs a kernel solver");
  const double y = curve_at(state, state.lambda, theta);
  const auto& nodes = ctx.theta_nodes;
  auto at = [&](double th) { return kernel_K_tilde(*ctx.solver, state.t, ctx.T, state.r, y, th, il.f, il.f_name); };
  if (nodes.empty()) return at(theta);
  if (theta <= nodes.front()) return at(nodes.front());
  if (theta >= nodes.back()) return at(nodes.back());
  const auto it = std::upper_bound(nodes.begin(), nodes.end(), theta);
  const double b = *it, a = *(it - 1);
  const double w = (theta - a) / (b - a);
  return (1.0 - w) * at(a) + w * at(b);
}

// Trapezoid over [a, b] using the grid nodes strictly inside plus both ends.
double integrate_theta(const std::vector<double>& grid, double a, double b, const std::function<double(double)>& f) {
  if (b <= a) return 0.0;
  std::vector<double> pts{a};
  for (double th : grid)
    if (th > a + 1e-12 && th < b - 1e-12) pts.push_back(th);
  pts.push_back(b);
  double acc = 0.0;
  double prev = f(pts[0]);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double cur = f(pts[i]);
    acc += 0.5 * (pts[i] - pts[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

double survival_at_t(const PricingState& state) {
  const double st = state.azema();
  if (!(st > 0.0)) throw std::domain_error("degenerate survival");
  return st;
}

} // namespace

double kernel_K1(double theta, const PricingState& state, const PricingContext& ctx) {
  const double st = survival_at_t(state);
  if (ctx.regime == Regime::Independent) return curve_at(state, state.alpha, theta) * ctx.B / st;
  return curve_at(state, state.survival, theta) / st * breve(theta, state, ctx);
}

double kernel_K2(double theta, const PricingState& state, const RecoveryModel& recovery, const PricingContext& ctx) {
  if (const auto* d = std::get_if<DeterministicRecovery>(&recovery.form())) {
    if (ctx.regime == Regime::Independent) return d->R(theta) * ctx.B;
    const double lam = curve_at(state, state.lambda, theta);
    if (lam <= 0.0) throw std::domain_error("kernel undefined at nonpositive intensity");
    if (lam < ctx.lambda_floor) return d->R(theta) * ctx.B;
    return d->R(theta) * breve(theta, state, ctx) / lam;
  }
  const auto& il = std::get<IntensityLinkedRecovery>(recovery.form());
  const double lam = curve_at(state, state.lambda, theta);
  if (lam <= 0.0) throw std::domain_error("kernel undefined at nonpositive intensity");
  if (lam < ctx.lambda_floor) return (il.w0 + il.w1 * std::exp(-il.f(lam))) * ctx.B;
  double out = il.w0 * breve(theta, state, ctx) / lam;
  if (il.w1 != 0.0) out += il.w1 * tilde(theta, state, ctx, il) / lam;
  return out;
}

PriceBreakdown price_defaultable_zcb(const DefaultStatus& status, const PricingState& state,
                                     const RecoveryModel& recovery, const PricingContext& ctx) {
  PriceBreakdown out;
  if (const auto* d = std::get_if<Defaulted>(&status)) {
    if (d->tau > state.t) throw std::invalid_argument("default time after valuation time");
    out.recovery_part = kernel_K2(d->tau, state, recovery, ctx);
    out.price = out.recovery_part;
    return out;
  }
  const double t = state.t;
  const double T = ctx.T;
  const double st = survival_at_t(state);
  const double theta_max = state.theta.back();
  if (T > theta_max) throw std::invalid_argument("maturity beyond the theta grid");

  out.survival_part = integrate_theta(state.theta, T, theta_max, [&](double th) { return kernel_K1(th, state, ctx); });
  // Flat-intensity extension beyond theta_max: int S(theta) dtheta = S(theta_max) / lambda(theta_max).
  const double s_end = state.survival.back();
  if (ctx.regime == Regime::Independent) {
    out.tail_correction = ctx.B * s_end / st;
  } else {
    const double lam = state.lambda.back();
    if (lam > ctx.lambda_floor) out.tail_correction = s_end / st * breve(theta_max, state, ctx) / lam;
  }
  out.survival_part += out.tail_correction;
  out.recovery_part = integrate_theta(state.theta, t, T, [&](double th) {
    return kernel_K2(th, state, recovery, ctx) * curve_at(state, state.alpha, th) / st;
  });
  out.price = out.survival_part + out.recovery_part;
  return out;
}

double price_pre_default_independent(double t, double T, const std::vector<double>& theta,
                                     const std::vector<double>& alpha, double R, double r, double tail) {
  if (theta.size() < 2 || theta.size() != alpha.size()) throw std::invalid_argument("alpha curve malformed");
  const double delta = theta[1] - theta[0];
  const auto first = static_cast<std::size_t>(std::llround(t / delta)) + 1;
  const auto last_num = static_cast<std::size_t>(std::llround(T / delta));
  const std::size_t last = theta.size() - 1;
  if (last_num > last) throw std::invalid_argument("maturity beyond the theta grid");
  double num = 0.0, den = 0.0;
  for (std::size_t i = first; i <= last; ++i) {
    const double v = delta * alpha[i];
    if (i <= last_num) num += v;
    den += v;
  }
  den += tail;
  if (den == 0.0) throw std::domain_error("zero denominator in pre-default price");
  return constant_rate_discount(r, t, T) * (1.0 - (1.0 - R) * num / den);
}

double deterministic_flat_price(double t, double T, double r, double R, double lambda_bar) {
  const double st = std::exp(-lambda_bar * t);
  return std::exp(-r * (T - t)) * (1.0 - (1.0 - R) * (st - std::exp(-lambda_bar * T)) / st);
}

} // namespace lrf
