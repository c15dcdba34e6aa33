#include "lrf/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "lrf/pricing.hpp"
#include "lrf/rng.hpp"

namespace lrf {

void ExperimentConfig::validate() const {
  if (n_paths < 1) throw std::invalid_argument("[experiment] n_paths: positive integer required");
  if (!(delta > 0.0)) throw std::invalid_argument("[experiment] delta: positive real required");
  if (!(delta_t > 0.0)) throw std::invalid_argument("[experiment] delta_t: positive real required");
  if (!(lambda_bar > 0.0)) throw std::invalid_argument("[model] lambda_bar: positive real required");
  if (!(t >= 0.0)) throw std::invalid_argument("[experiment] t: nonnegative real required");
  if (!(T >= t)) throw std::invalid_argument("[experiment] T: value >= t required");
  if (!(R >= 0.0 && R <= 1.0)) throw std::invalid_argument("[pricing] R: value in [0,1] required");
  if (!(sigma >= 0.0)) throw std::invalid_argument("[model] sigma: nonnegative real required");
  if (!(b >= 0.0)) throw std::invalid_argument("[model] b: nonnegative real required");
  if (!(zeta >= 0.0)) throw std::invalid_argument("[levy_measure] zeta: nonnegative real required");
  if (!(varpi >= 0.0)) throw std::invalid_argument("[levy_measure] varpi: nonnegative real required");
  const double ratio = t / delta_t;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw std::invalid_argument("[experiment] t: multiple of delta_t required");
}

namespace {

double pos(double x) { return x > 0.0 ? x : 0.0; }

// Runs body(i) for i in [0, n) on `workers` threads, each writing only its
// own slots. Rethrows the first exception.
template <class Body>
void parallel_for(std::size_t n, unsigned workers, Body body) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace

Section7Simulator::Section7Simulator(ExperimentConfig config)
    : config_(std::move(config)),
      dynamics_((config_.validate(), config_.sigma), config_.b, config_.zeta, config_.varpi, config_.jump_sign,
                config_.scheme, config_.quadrature_nodes) {
  theta_ = make_theta_grid(config_.delta, resolve_theta_max(config_.theta_max_rule, config_.lambda_bar));
  if (config_.T > theta_.back()) throw std::invalid_argument("[experiment] T: beyond theta_max");
  steps_ = static_cast<std::size_t>(std::llround(config_.t / config_.delta_t));
  if (config_.evaluator == PathEvaluator::Aggregated && config_.scheme != DensityScheme::Exponential)
    throw std::invalid_argument("[experiment] evaluator: aggregated requires the exponential scheme");
  aggregated_ = config_.scheme == DensityScheme::Exponential && config_.evaluator != PathEvaluator::Stepwise;

  // Same accumulation as the stepwise state clock.
  times_.resize(steps_);
  double clock = 0.0;
  for (std::size_t k = 0; k < steps_; ++k) {
    times_[k] = clock;
    clock += config_.delta_t;
  }
  if (!aggregated_) return;

  const double dt = config_.delta_t;
  const double sgn = dynamics_.sign_factor();
  const double zeta = dynamics_.measure().is_null() ? 0.0 : config_.zeta;
  const double varpi = config_.varpi;
  drift_lambda_.assign(theta_.size(), 0.0);
  drift_log_.assign(theta_.size(), 0.0);
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    double dl = 0.0, dg = 0.0;
    for (std::size_t k = 0; k < steps_; ++k) {
      const double s = pos(theta_[i] - times_[k]);
      if (s == 0.0) break;
      const double sig = config_.sigma * s;
      const double i_sigma = 0.5 * sig * s;
      const double gam = config_.b * s;
      const double big_gamma = 0.5 * gam * s;
      const double q = 1.0 + varpi * big_gamma;
      dl += sig * i_sigma * dt + sgn * dt * zeta * gam * varpi / (q * q);
      dg += -0.5 * i_sigma * i_sigma * dt - sgn * dt * zeta * varpi * big_gamma / q;
    }
    drift_lambda_[i] = dl;
    drift_log_[i] = dg;
  }
  drift_survival_.resize(theta_.size());
  for (std::size_t i = 0; i < theta_.size(); ++i) drift_survival_[i] = std::exp(drift_log_[i]);
}

DensityCurveState Section7Simulator::curves(std::uint64_t path) const {
  return aggregated_ ? curves_aggregated(path) : curves_stepwise(path);
}

DensityCurveState Section7Simulator::curves_stepwise(std::uint64_t path) const {
  PathStreams streams(config_.seed, path);
  DensityCurveState state = DensityCurveState::flat(theta_, config_.lambda_bar);
  for (std::size_t k = 0; k < steps_; ++k) state = evolve_density_direct(state, dynamics_, config_.delta_t, streams);
  return state;
}

DensityCurveState Section7Simulator::curves_aggregated(std::uint64_t path) const {
  Curves c;
  aggregate_into(path, c);
  DensityCurveState out;
  out.t = steps_ == 0 ? 0.0 : times_.back() + config_.delta_t;
  out.theta = theta_;
  out.lambda = std::move(c.lambda);
  out.survival = std::move(c.survival);
  out.alpha = std::move(c.alpha);
  out.negative_alpha_count = c.negative_alpha;
  return out;
}

void Section7Simulator::aggregate_into(std::uint64_t path, Curves& out) const {
  if (config_.scheme != DensityScheme::Exponential)
    throw std::logic_error("aggregated evaluation needs the exponential scheme");
  const double dt = config_.delta_t;
  PathStreams streams(config_.seed, path);

  struct StepJump {
    double t, mark;
  };
  std::vector<double> dw(steps_);
  std::vector<StepJump> jumps;
  for (std::size_t k = 0; k < steps_; ++k) {
    const DensityNoise noise = draw_density_noise(dynamics_, times_[k], dt, streams);
    dw[k] = noise.dW;
    for (const Jump& j : noise.jumps) jumps.push_back({times_[k], j.mark});
  }

  const std::size_t n = theta_.size();
  out.lambda.resize(n);
  out.survival.resize(n);
  out.alpha.resize(n);
  out.negative_alpha = 0;

  // Per-thread scratch: fresh large vectors per path cost page faults.
  thread_local std::vector<double> jump_lambda, jump_log, product;
  thread_local std::vector<int> saturated;
  jump_lambda.assign(n, 0.0);
  jump_log.assign(n, 0.0);
  bool jump_is_factor = false;
  const double b = config_.b;
  if (b == 0.0) jumps.clear();  // gamma vanishes, marks have no effect
  if (config_.jump_sign == JumpSign::Section7 && !jumps.empty()) {
    // Factors 2 - e lie in (1, 2]; multiply then take one log per theta.
    const bool use_product = jumps.size() < 900;
    product.assign(use_product ? n : 0, 1.0);
    saturated.assign(n + 1, 0);
    const double h = config_.delta;
    for (const StepJump& j : jumps) {
      std::size_t i = static_cast<std::size_t>(std::upper_bound(theta_.begin(), theta_.end(), j.t) - theta_.begin());
      // e(s) = exp(-mark b s^2 / 2) advanced multiplicatively along the
      // uniform grid, re-anchored every 64 nodes.
      double e = 0.0, ratio = 0.0;
      const double curvature = std::exp(-j.mark * b * h * h);
      for (std::size_t step = 0; i < n; ++i, ++step) {
        const double s = theta_[i] - j.t;
        if (step % 64 == 0) {
          e = std::exp(-j.mark * 0.5 * b * s * s);
          ratio = std::exp(-j.mark * b * (s * h + 0.5 * h * h));
        }
        if (e < 1e-18) {
          ++saturated[i];
          break;
        }
        const double gam = b * s;
        jump_lambda[i] -= gam * j.mark * e / (2.0 - e);
        if (use_product)
          product[i] *= 2.0 - e;
        else
          jump_log[i] += std::log(2.0 - e);
        e *= ratio;
        ratio *= curvature;
      }
    }
    // jump_log now holds the survival factor itself, not its log
    int running = 0;
    for (std::size_t i = 0; i < n; ++i) {
      running += saturated[i];
      const double f = use_product ? product[i] : (jump_log[i] == 0.0 ? 1.0 : std::exp(jump_log[i]));
      jump_log[i] = std::ldexp(f, running);
    }
    jump_is_factor = true;
  } else if (!jumps.empty()) {
    // gamma xi and xi Gamma are polynomial in theta: keep prefix moments.
    std::size_t next_jump = 0;
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double th = theta_[i];
      while (next_jump < jumps.size() && jumps[next_jump].t < th) {
        const auto& j = jumps[next_jump++];
        m0 += j.mark;
        m1 += j.mark * j.t;
        m2 += j.mark * j.t * j.t;
      }
      jump_lambda[i] = b * (th * m0 - m1);
      jump_log[i] = -0.5 * b * (th * th * m0 - 2.0 * th * m1 + m2);
    }
  }

  // Past the last step the Gaussian log-survival is a fixed quadratic in
  // theta, so its exponential follows a two-term multiplicative recurrence
  // on the uniform grid, re-anchored every 64 nodes.
  std::size_t m = 0;
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  const double sigma = config_.sigma, lb = config_.lambda_bar, h = config_.delta;
  auto gauss_log = [&](double th) { return -lb * th - 0.5 * sigma * (th * th * w0 - 2.0 * th * w1 + w2); };
  double e = 0.0, ratio = 0.0, curvature = 0.0;
  std::size_t since_anchor = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = theta_[i];
    const bool moving = m < steps_;
    while (m < steps_ && th - times_[m] > 0.0) {
      w0 += dw[m];
      w1 += times_[m] * dw[m];
      w2 += times_[m] * times_[m] * dw[m];
      ++m;
    }
    double g;
    if (moving || since_anchor % 64 == 0) {
      const double here = gauss_log(th);
      g = std::exp(here);
      e = g;
      ratio = std::exp(gauss_log(th + h) - here);
      curvature = std::exp(-sigma * w0 * h * h);
      since_anchor = moving ? 0 : since_anchor;
    } else {
      e *= ratio;
      ratio *= curvature;
      g = e;
    }
    ++since_anchor;
    const double jump = jump_is_factor ? jump_log[i] : (jump_log[i] == 0.0 ? 1.0 : std::exp(jump_log[i]));
    const double lam = lb + sigma * (th * w0 - w1) + drift_lambda_[i] + jump_lambda[i];
    out.lambda[i] = lam;
    out.survival[i] = g * drift_survival_[i] * jump;
    out.alpha[i] = out.survival[i] * lam;
    if (out.alpha[i] < 0.0) ++out.negative_alpha;
  }
}

PathPrice Section7Simulator::price(std::uint64_t path) const {
  // Reused per thread: fresh curve vectors per path cost page faults.
  thread_local Curves c;
  if (aggregated_) {
    aggregate_into(path, c);
  } else {
    DensityCurveState s = curves_stepwise(path);
    c.lambda = std::move(s.lambda);
    c.survival = std::move(s.survival);
    c.alpha = std::move(s.alpha);
  }
  const auto first = static_cast<std::size_t>(std::llround(config_.t / config_.delta)) + 1;
  PathPrice out;
  double den = config_.tail ? c.survival.back() : 0.0;
  for (std::size_t i = first; i < c.alpha.size(); ++i) {
    den += config_.delta * c.alpha[i];
    if (c.alpha[i] < 0.0) out.flagged = true;
  }
  if (!(den > 0.0)) {
    out.rejected = true;
    out.price = std::nan("");
    return out;
  }
  out.price = price_pre_default_independent(config_.t, config_.T, theta_, c.alpha, config_.R, config_.r,
                                            config_.tail ? c.survival.back() : 0.0);
  return out;
}

std::size_t PriceDistribution::flagged_count() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), true));
}

double PriceDistribution::flagged_fraction() const {
  return prices.empty() ? 0.0 : static_cast<double>(flagged_count()) / static_cast<double>(prices.size());
}

PriceDistribution run_price_distribution(const ExperimentConfig& config) {
  const Section7Simulator sim(config);
  std::vector<PathPrice> all(config.n_paths);
  parallel_for(config.n_paths, config.workers, [&](std::size_t p) { all[p] = sim.price(p); });
  PriceDistribution out;
  out.prices.reserve(all.size());
  for (std::size_t p = 0; p < all.size(); ++p) {
    if (all[p].rejected) {
      ++out.rejected;
      continue;
    }
    out.prices.push_back(all[p].price);
    out.paths.push_back(p);
    out.flagged.push_back(all[p].flagged);
  }
  return out;
}

SampleStats sample_stats(const std::vector<double>& x) {
  SampleStats s;
  s.n = x.size();
  if (x.empty()) return s;
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : x) {
    const double d = v - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  if (x.size() > 1) {
    s.sd = std::sqrt(m2 / (n - 1.0));
    s.se = s.sd / std::sqrt(n);
  }
  m2 /= n;
  m3 /= n;
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return s;
}

double kde_bandwidth(const std::vector<double>& samples) {
  if (samples.size() < 2) throw std::invalid_argument("degenerate sample");
  const SampleStats s = sample_stats(samples);
  if (!(s.sd > 0.0)) throw std::invalid_argument("degenerate sample");
  return 1.06 * s.sd * std::pow(static_cast<double>(samples.size()), -0.2);
}

std::vector<double> kde(const std::vector<double>& samples, const std::vector<double>& x_grid) {
  const double h = kde_bandwidth(samples);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * h * static_cast<double>(samples.size()));
  std::vector<double> out(x_grid.size(), 0.0);
  for (std::size_t g = 0; g < x_grid.size(); ++g) {
    double acc = 0.0;
    for (double p : samples) {
      const double z = (x_grid[g] - p) / h;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = acc * norm;
  }
  return out;
}

SweepAxis parse_sweep_axis(const std::string& s) {
  if (s == "varpi") return SweepAxis::Varpi;
  if (s == "lambda") return SweepAxis::Lambda;
  if (s == "t") return SweepAxis::t;
  if (s == "T") return SweepAxis::T;
  throw std::invalid_argument("[experiment] sweep_axis: expected varpi, lambda, t or T");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::Varpi: return "varpi";
    case SweepAxis::Lambda: return "lambda";
    case SweepAxis::t: return "t";
    case SweepAxis::T: return "T";
  }
  return "?";
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                            bool keep_prices) {
  if (!std::is_sorted(values.begin(), values.end())) throw std::invalid_argument("[experiment] sweep values must be sorted");
  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < values.size(); ++c) {
    ExperimentConfig cell = config;
    cell.seed = derive_seed(config.seed, c);
    switch (axis) {
      case SweepAxis::Varpi: cell.varpi = values[c]; break;
      case SweepAxis::Lambda: cell.lambda_bar = values[c]; break;
      case SweepAxis::t: cell.t = values[c]; break;
      case SweepAxis::T: cell.T = values[c]; break;
    }
    PriceDistribution dist = run_price_distribution(cell);
    const SampleStats st = sample_stats(dist.prices);
    SweepRow row;
    row.value = values[c];
    row.mean = st.mean;
    row.se = st.se;
    row.skewness = st.skewness;
    row.flagged_fraction = dist.flagged_fraction();
    row.rejected = dist.rejected;
    if (keep_prices) row.prices = std::move(dist.prices);
    rows.push_back(std::move(row));
  }
  return rows;
}

double tail_mass_above(const std::vector<double>& x, double level) {
  if (x.empty()) return 0.0;
  const auto c = std::count_if(x.begin(), x.end(), [&](double v) { return v > level; });
  return static_cast<double>(c) / static_cast<double>(x.size());
}

bool MartingaleCell::within(double n_se) const { return std::abs(mean - initial) <= n_se * se; }

std::vector<MartingaleCell> density_martingale_check(const ExperimentConfig& config, const std::vector<double>& thetas) {
  const Section7Simulator sim(config);
  const std::size_t n = config.n_paths;
  std::vector<double> values(n * thetas.size());
  parallel_for(n, config.workers, [&](std::size_t p) {
    const DensityCurveState c = sim.curves(p);
    for (std::size_t q = 0; q < thetas.size(); ++q) values[p * thetas.size() + q] = interpolate_uniform(c.theta, c.alpha, thetas[q]);
  });
  std::vector<MartingaleCell> out;
  for (std::size_t q = 0; q < thetas.size(); ++q) {
    std::vector<double> col(n);
    for (std::size_t p = 0; p < n; ++p) col[p] = values[p * thetas.size() + q];
    const SampleStats st = sample_stats(col);
    MartingaleCell cell;
    cell.theta = thetas[q];
    cell.initial = config.lambda_bar * std::exp(-config.lambda_bar * thetas[q]);
    cell.mean = st.mean;
    cell.se = st.se;
    out.push_back(cell);
  }
  return out;
}

} // namespace lrf
