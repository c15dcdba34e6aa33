#include "lrf/pide.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lrf {

DeltaHatSign parse_delta_hat_sign(const std::string& s) {
  if (s == "derived") return DeltaHatSign::Derived;
  if (s == "as_printed") return DeltaHatSign::AsPrinted;
  throw std::invalid_argument("[pide] delta_hat_sign: expected derived or as_printed");
}

JumpCompensator parse_jump_compensator(const std::string& s) {
  if (s == "as_printed") return JumpCompensator::AsPrinted;
  if (s == "measure_changed") return JumpCompensator::MeasureChanged;
  throw std::invalid_argument("[pide] jump_compensator: expected as_printed or measure_changed");
}

std::string to_string(DeltaHatSign s) { return s == DeltaHatSign::Derived ? "derived" : "as_printed"; }
std::string to_string(JumpCompensator s) { return s == JumpCompensator::AsPrinted ? "as_printed" : "measure_changed"; }

double OperatorCoefficients::jump_mass() const {
  double m = 0.0;
  for (double w : jump_weight) m += w;
  return m;
}

OperatorCoefficients compute_coefficients(const CoefficientSpec& model, const VasicekSpec& rates,
                                          const FieldIncrementPlan& field, const LevyMeasure& measure, double t,
                                          double theta, CoefficientOptions options) {
  rates.validate();
  const std::size_t n = field.size();
  std::vector<double> sig(n), isig(n), rho(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = field.xi_nodes[k];
    sig[k] = model.sigma(t, theta, xi);
    isig[k] = cumulative_integrals(model, t, theta, xi).sigma;
    rho[k] = rates.rho(t, xi);
  }
  const auto& kmat = field.weighted_kernel;
  OperatorCoefficients c;
  c.kappa = rates.kappa;
  if (n) {
    c.a11 = 0.5 * kernel_quadratic_form(kmat, rho, rho);
    c.a22 = 0.5 * kernel_quadratic_form(kmat, sig, sig);
    c.a12 = kernel_quadratic_form(kmat, sig, rho);
  }
  const double gauss_shift = n ? kernel_quadratic_form(kmat, rho, isig) : 0.0;
  const double sign = options.delta_hat_sign == DeltaHatSign::Derived ? -1.0 : 1.0;
  double jump_shift = 0.0;
  double gamma_drift = 0.0;
  const auto nodes = measure.nodes();
  const auto weights = measure.weights();
  if (!measure.is_null()) {
    if (!measure.finite_activity()) throw std::domain_error("finite-activity required");
    c.jump_weight.resize(nodes.size());
    c.jump_x.resize(nodes.size());
    c.jump_y.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double xi = nodes[k];
      const double e = std::exp(-cumulative_integrals(model, t, theta, xi).gamma);
      const double phi = rates.phi(t, xi);
      const double gam = model.gamma(t, theta, xi);
      jump_shift += weights[k] * phi * (e - 1.0);
      gamma_drift += weights[k] * gam * (1.0 - e);
      c.jump_weight[k] = options.jump_compensator == JumpCompensator::MeasureChanged ? weights[k] * e : weights[k];
      c.jump_x[k] = phi;
      c.jump_y[k] = gam;
    }
  }
  c.delta_hat = rates.delta + (sign * gauss_shift + jump_shift) / rates.kappa;
  const double sigma_drift = n ? kernel_quadratic_form(kmat, sig, isig) : 0.0;
  c.a_drift = mc_drift(model, field, measure, t, theta) - sigma_drift - gamma_drift;
  return c;
}

// ---------------------------------------------------------------------------

StateGrid::StateGrid(double x0, double x1, int nx_, double y0, double y1, int ny_)
    : x_min(x0), x_max(x1), nx(nx_), y_min(y0), y_max(y1), ny(ny_) {
  if (nx < 16 || ny < 16) throw std::invalid_argument("[pide] nx, ny: at least 16 required");
  if (!(x_max > x_min) || !(y_max > y_min)) throw std::invalid_argument("[pide] ranges must be nonempty");
}

GridFunction GridFunction::from(const StateGrid& grid, const std::function<double(double, double)>& f, double time) {
  GridFunction g;
  g.grid = grid;
  g.time = time;
  g.values.resize(static_cast<Eigen::Index>(grid.size()));
  for (int j = 0; j < grid.ny; ++j)
    for (int i = 0; i < grid.nx; ++i) g.values(static_cast<Eigen::Index>(grid.index(i, j))) = f(grid.x(i), grid.y(j));
  return g;
}

double GridFunction::interpolate(double x, double y) const {
  const double u = (x - grid.x_min) / grid.hx();
  const double v = (y - grid.y_min) / grid.hy();
  const int i = std::clamp(static_cast<int>(std::floor(u)), 0, grid.nx - 2);
  const int j = std::clamp(static_cast<int>(std::floor(v)), 0, grid.ny - 2);
  const double a = u - i;
  const double b = v - j;
  return (1 - a) * (1 - b) * at(i, j) + a * (1 - b) * at(i + 1, j) + (1 - a) * b * at(i, j + 1) + a * b * at(i + 1, j + 1);
}

namespace {

double dx_at(const GridFunction& k, int i, int j) {
  const auto& g = k.grid;
  if (i == 0) return (-3 * k.at(0, j) + 4 * k.at(1, j) - k.at(2, j)) / (2 * g.hx());
  if (i == g.nx - 1) return (3 * k.at(i, j) - 4 * k.at(i - 1, j) + k.at(i - 2, j)) / (2 * g.hx());
  return (k.at(i + 1, j) - k.at(i - 1, j)) / (2 * g.hx());
}

double dy_at(const GridFunction& k, int i, int j) {
  const auto& g = k.grid;
  if (j == 0) return (-3 * k.at(i, 0) + 4 * k.at(i, 1) - k.at(i, 2)) / (2 * g.hy());
  if (j == g.ny - 1) return (3 * k.at(i, j) - 4 * k.at(i, j - 1) + k.at(i, j - 2)) / (2 * g.hy());
  return (k.at(i, j + 1) - k.at(i, j - 1)) / (2 * g.hy());
}

} // namespace

GridFunction apply_jump_operator(const GridFunction& k, const OperatorCoefficients& coeffs) {
  GridFunction out = k;
  out.values.setZero();
  if (coeffs.jump_weight.empty()) return out;
  const auto& g = k.grid;
  bool any_x = false;
  for (double p : coeffs.jump_x) any_x = any_x || p != 0.0;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x = g.x(i), y = g.y(j), base = k.at(i, j);
      const double kx = any_x ? dx_at(k, i, j) : 0.0;
      const double ky = dy_at(k, i, j);
      double acc = 0.0;
      for (std::size_t q = 0; q < coeffs.jump_weight.size(); ++q) {
        const double w = coeffs.jump_weight[q];
        const double px = coeffs.jump_x[q], py = coeffs.jump_y[q];
        if (w == 0.0 || (px == 0.0 && py == 0.0)) continue;
        acc += w * (k.interpolate(x + px, y + py) - base - px * kx - py * ky);
      }
      out.values(static_cast<Eigen::Index>(g.index(i, j))) = acc;
    }
  }
  return out;
}

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

bool same_local(const OperatorCoefficients& a, const OperatorCoefficients& b) {
  return a.kappa == b.kappa && a.delta_hat == b.delta_hat && a.a_drift == b.a_drift && a.a11 == b.a11 &&
         a.a22 == b.a22 && a.a12 == b.a12;
}

// Local operator L (drift, diffusion, discount) on interior rows. Every
// interior row stores all nine stencil entries so the pattern never changes.
SpMat local_operator(const StateGrid& g, const OperatorCoefficients& c, double ridge_eps) {
  const double hx = g.hx(), hy = g.hy();
  const double amax = std::max(c.a11, c.a22);
  const double ridge = amax > 0.0 ? ridge_eps * amax : 0.0;
  const double axx = c.a11 + ridge, ayy = c.a22 + ridge;
  const double cross = c.a12 / (4.0 * hx * hy);
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(g.nx - 2) * (g.ny - 2) * 9);
  for (int j = 1; j < g.ny - 1; ++j) {
    for (int i = 1; i < g.nx - 1; ++i) {
      const double x = g.x(i);
      double w = axx / (hx * hx), e = w, s = ayy / (hy * hy), n = s;
      double centre = -2.0 * axx / (hx * hx) - 2.0 * ayy / (hy * hy) - x;
      const double bx = c.kappa * (c.delta_hat - x);
      if (std::abs(bx) * hx <= 2.0 * axx) {
        e += bx / (2 * hx);
        w -= bx / (2 * hx);
      } else if (bx > 0) {
        e += bx / hx;
        centre -= bx / hx;
      } else {
        w -= bx / hx;
        centre += bx / hx;
      }
      const double by = c.a_drift;
      if (std::abs(by) * hy <= 2.0 * ayy) {
        n += by / (2 * hy);
        s -= by / (2 * hy);
      } else if (by > 0) {
        n += by / hy;
        centre -= by / hy;
      } else {
        s -= by / hy;
        centre += by / hy;
      }
      const auto row = static_cast<int>(g.index(i, j));
      auto col = [&](int di, int dj) { return static_cast<int>(g.index(i + di, j + dj)); };
      trip.emplace_back(row, row, centre);
      trip.emplace_back(row, col(-1, 0), w);
      trip.emplace_back(row, col(1, 0), e);
      trip.emplace_back(row, col(0, -1), s);
      trip.emplace_back(row, col(0, 1), n);
      trip.emplace_back(row, col(1, 1), cross);
      trip.emplace_back(row, col(-1, -1), cross);
      trip.emplace_back(row, col(-1, 1), -cross);
      trip.emplace_back(row, col(1, -1), -cross);
    }
  }
  SpMat l(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  l.setFromTriplets(trip.begin(), trip.end());
  return l;
}

// Identity on interior rows plus the boundary rows K_b - 2 K_{b-1} + K_{b-2} = 0.
SpMat boundary_identity(const StateGrid& g) {
  std::vector<Triplet> trip;
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const auto row = static_cast<int>(g.index(i, j));
      auto at = [&](int a, int b) { return static_cast<int>(g.index(a, b)); };
      if (i == 0) {
        trip.emplace_back(row, row, 1.0);
        trip.emplace_back(row, at(1, j), -2.0);
        trip.emplace_back(row, at(2, j), 1.0);
      } else if (i == g.nx - 1) {
        trip.emplace_back(row, row, 1.0);
        trip.emplace_back(row, at(i - 1, j), -2.0);
        trip.emplace_back(row, at(i - 2, j), 1.0);
      } else if (j == 0) {
        trip.emplace_back(row, row, 1.0);
        trip.emplace_back(row, at(i, 1), -2.0);
        trip.emplace_back(row, at(i, 2), 1.0);
      } else if (j == g.ny - 1) {
        trip.emplace_back(row, row, 1.0);
        trip.emplace_back(row, at(i, j - 1), -2.0);
        trip.emplace_back(row, at(i, j - 2), 1.0);
      } else {
        trip.emplace_back(row, row, 1.0);
      }
    }
  }
  SpMat b(static_cast<Eigen::Index>(g.size()), static_cast<Eigen::Index>(g.size()));
  b.setFromTriplets(trip.begin(), trip.end());
  return b;
}

void zero_boundary(const StateGrid& g, Eigen::VectorXd& v) {
  for (int i = 0; i < g.nx; ++i) {
    v(static_cast<Eigen::Index>(g.index(i, 0))) = 0.0;
    v(static_cast<Eigen::Index>(g.index(i, g.ny - 1))) = 0.0;
  }
  for (int j = 0; j < g.ny; ++j) {
    v(static_cast<Eigen::Index>(g.index(0, j))) = 0.0;
    v(static_cast<Eigen::Index>(g.index(g.nx - 1, j))) = 0.0;
  }
}

} // namespace

GridFunction solve_cauchy(const std::function<double(double, double)>& terminal, const PideConfig& config,
                          double t_start, double T, const CoefficientProvider& coeffs, SolveReport* report) {
  const StateGrid g = config.grid();
  if (config.n_steps < 1) throw std::invalid_argument("[pide] n_steps: positive integer required");
  if (T < t_start) throw std::invalid_argument("maturity before start time");
  GridFunction k = GridFunction::from(g, terminal, T);
  for (Eigen::Index q = 0; q < k.values.size(); ++q)
    if (!std::isfinite(k.values(q))) throw std::invalid_argument("terminal condition not finite on the grid");
  if (T == t_start) return k;

  const double dt = (T - t_start) / config.n_steps;
  const double th = config.time_theta;
  SolveReport local_report;
  SolveReport& rep = report ? *report : local_report;

  const SpMat bid = boundary_identity(g);
  Eigen::SparseLU<SpMat> lu;
  bool analysed = false;
  OperatorCoefficients c_hi = coeffs(T);
  OperatorCoefficients factored;
  bool have_factor = false;
  SpMat l_hi = local_operator(g, c_hi, config.ridge_eps);
  const double discount_growth = std::exp(dt * std::max(0.0, -g.x_min));

  for (int n = 0; n < config.n_steps; ++n) {
    const double t_hi = T - n * dt;
    const double t_lo = T - (n + 1) * dt;
    const OperatorCoefficients c_lo = coeffs(t_lo);
    if (dt * c_hi.jump_mass() > 1.0) {
      std::ostringstream os;
      os << "explicit jump term unstable: dt * nu_total = " << dt * c_hi.jump_mass()
         << " > 1; use n_steps >= " << static_cast<int>(std::ceil((T - t_start) * c_hi.jump_mass()));
      throw std::invalid_argument(os.str());
    }
    if (!c_lo.elliptic()) ++rep.degenerate_steps;

    const SpMat l_lo = local_operator(g, c_lo, config.ridge_eps);
    if (!have_factor || !same_local(c_lo, factored)) {
      const SpMat a = bid - (th * dt) * l_lo;
      if (!analysed) {
        lu.analyzePattern(a);
        analysed = true;
      }
      lu.factorize(a);
      if (lu.info() != Eigen::Success) throw std::runtime_error("PIDE system factorization failed");
      factored = c_lo;
      have_factor = true;
      ++rep.refactorizations;
    }

    Eigen::VectorXd rhs = k.values;
    if (th < 1.0) rhs += ((1.0 - th) * dt) * (l_hi * k.values);
    const bool jumps = !c_hi.jump_weight.empty() || !c_lo.jump_weight.empty();
    Eigen::VectorXd j_hi;
    if (jumps) j_hi = apply_jump_operator(k, c_hi).values;

    Eigen::VectorXd next;
    if (!jumps) {
      zero_boundary(g, rhs);
      next = lu.solve(rhs);
    } else if (!config.picard_mode) {
      rhs += dt * j_hi;
      zero_boundary(g, rhs);
      next = lu.solve(rhs);
    } else {
      // Fixed-point iteration on the jump term, weighted like the local part.
      GridFunction iter = k;
      iter.time = t_lo;
      Eigen::VectorXd base = rhs + ((1.0 - th) * dt) * j_hi;
      for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd r = base + (th * dt) * apply_jump_operator(iter, c_lo).values;
        zero_boundary(g, r);
        Eigen::VectorXd cand = lu.solve(r);
        const double change = (cand - iter.values).cwiseAbs().maxCoeff();
        const double scale = 1.0 + cand.cwiseAbs().maxCoeff();
        iter.values = std::move(cand);
        ++rep.picard_iterations;
        if (change <= 1e-13 * scale) break;
      }
      next = std::move(iter.values);
    }

    const double sup_old = k.values.cwiseAbs().maxCoeff();
    const double sup_new = next.cwiseAbs().maxCoeff();
    if (!std::isfinite(sup_new)) throw std::runtime_error("PIDE solution not finite; reduce the time step");
    if (sup_old > 0.0) {
      const double growth = sup_new / sup_old;
      rep.max_growth = std::max(rep.max_growth, growth);
      if (growth > discount_growth * (1.0 + 50.0 * dt) + 1e-12) {
        std::ostringstream os;
        os << "PIDE instability detected at t=" << t_lo << " (sup-norm growth " << growth
           << "); try n_steps >= " << 2 * config.n_steps;
        throw std::runtime_error(os.str());
      }
    }
    k.values = std::move(next);
    k.time = t_lo;
    c_hi = c_lo;
    l_hi = l_lo;
    (void)t_hi;
  }
  return k;
}

// ---------------------------------------------------------------------------

std::shared_ptr<const GridFunction> KernelSolver::solution(double t, double T, double theta, const std::string& tag,
                                                           const std::function<double(double, double)>& terminal) {
  const auto key = std::make_tuple(t, T, theta, tag);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  const KernelModel& m = model_;
  CoefficientProvider provider = [&m, theta](double u) {
    return compute_coefficients(m.intensity, m.rates, m.field, m.measure, u, theta, m.options);
  };
  auto sol = std::make_shared<const GridFunction>(solve_cauchy(terminal, m.pide, t, T, provider));
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(key, std::move(sol)).first->second;
}

std::size_t KernelSolver::cached() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

namespace {

void check_inside(const StateGrid& g, double r, double lambda) {
  if (!g.contains(r, lambda)) {
    std::ostringstream os;
    os << "query (r=" << r << ", lambda=" << lambda << ") outside PIDE grid [" << g.x_min << "," << g.x_max << "]x["
       << g.y_min << "," << g.y_max << "]";
    throw std::out_of_range(os.str());
  }
}

} // namespace

double kernel_K_breve(KernelSolver& solver, double t, double T, double r, double lambda, double theta) {
  if (t == T) return lambda;
  check_inside(solver.model().pide.grid(), r, lambda);
  auto sol = solver.solution(t, T, theta, "y", [](double, double y) { return y; });
  return sol->interpolate(r, lambda);
}

double kernel_K_tilde(KernelSolver& solver, double t, double T, double r, double lambda, double theta,
                      const std::function<double(double)>& f, const std::string& f_name) {
  if (t == T) return lambda * std::exp(-f(lambda));
  check_inside(solver.model().pide.grid(), r, lambda);
  auto sol = solver.solution(t, T, theta, "yexp-" + f_name, [&f](double, double y) { return y * std::exp(-f(y)); });
  return sol->interpolate(r, lambda);
}

void monte_carlo_kernel(const KernelModel& model, double t, double T, double theta, std::vector<KernelProbe>& probes,
                        std::size_t n_paths, std::uint64_t seed, double dt, const std::function<double(double)>& psi,
                        double theta_step) {
  if (probes.empty()) return;
  const auto steps = static_cast<std::size_t>(std::llround((T - t) / dt));
  if (steps == 0) throw std::invalid_argument("horizon shorter than one step");
  const auto nv = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(theta / theta_step)));
  std::vector<double> vgrid(nv + 1);
  for (std::size_t i = 0; i <= nv; ++i) vgrid[i] = theta * static_cast<double>(i) / static_cast<double>(nv);
  FieldIncrementPlan plan = model.field;
  plan.time_step = dt;
  const IntensityModel im(model.intensity, plan, model.measure, vgrid, T);
  const double kappa = model.rates.kappa;
  double rate_weight = 0.0;
  for (std::size_t k = 0; k < steps; ++k)
    rate_weight += 0.5 * dt * (std::exp(-kappa * k * dt) + std::exp(-kappa * (k + 1) * dt));
  const double r_ref = probes.front().r;

  std::vector<double> sum(probes.size(), 0.0), sum2(probes.size(), 0.0);
  for (std::size_t p = 0; p < n_paths; ++p) {
    PathStreams streams(seed, p);
    RandomStream residual(seed, p, Channel::RateResidual);
    ForwardCurveState state;
    state.t = t;
    state.theta = vgrid;
    state.lambda.assign(vgrid.size(), 0.0);
    double r = r_ref, rate_integral = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double tk = t + static_cast<double>(k) * dt;
      state.t = tk;
      const StepNoise noise = draw_step_noise(plan, model.measure, tk, dt, streams);
      const double r_next = evolve_rate(r, model.rates, plan, model.measure, tk, dt, noise, residual);
      state = evolve_intensity(state, im, noise);
      rate_integral += 0.5 * dt * (r + r_next);
      r = r_next;
    }
    double area = 0.0;
    for (std::size_t i = 1; i < vgrid.size(); ++i)
      area += 0.5 * (vgrid[i] - vgrid[i - 1]) * (state.lambda[i] + state.lambda[i - 1]);
    const double d_theta = state.lambda.back();
    for (std::size_t q = 0; q < probes.size(); ++q) {
      const double v = psi(probes[q].lambda + d_theta) *
                       std::exp(-area - rate_integral - (probes[q].r - r_ref) * rate_weight);
      sum[q] += v;
      sum2[q] += v * v;
    }
  }
  const double n = static_cast<double>(n_paths);
  for (std::size_t q = 0; q < probes.size(); ++q) {
    probes[q].mean = sum[q] / n;
    probes[q].se = std::sqrt(std::max(0.0, sum2[q] / n - probes[q].mean * probes[q].mean) / (n - 1.0));
  }
}

} // namespace lrf
