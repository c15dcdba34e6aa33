#include "lrf/levy_field.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lrf {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double min_spacing(std::span<const double> nodes) {
  std::vector<double> sorted(nodes.begin(), nodes.end());
  std::sort(sorted.begin(), sorted.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sorted.size(); ++i) best = std::min(best, sorted[i] - sorted[i - 1]);
  return best;
}

} // namespace

CorrelationKernel::CorrelationKernel(Form form, int dimension)
    : form_(std::move(form)), dimension_(dimension) {
  if (dimension_ < 0) throw std::invalid_argument("kernel dimension must be nonnegative");
  std::visit(overloaded{
                 [](const DiracKernel& k) {
                   if (!(k.c0 > 0.0)) throw std::invalid_argument("[kernel] c0: positive real required");
                 },
                 [this](const RieszKernel& k) {
                   if (!(k.alpha > 0.0 && k.alpha < dimension_))
                     throw std::invalid_argument("[kernel] alpha: must lie in (0, d)");
                   if (k.cutoff < 0.0) throw std::invalid_argument("[kernel] cutoff: must be nonnegative");
                 },
                 [this](const FractionalKernel& k) {
                   if (!(k.h > 0.5 && k.h < 1.0)) throw std::invalid_argument("[kernel] h: must lie in (1/2, 1)");
                   if (dimension_ != 1) throw std::invalid_argument("[kernel] fractional kernel requires d = 1");
                 },
                 [](const TabulatedKernel& k) {
                   if (k.xi.size() != k.density.size() || k.xi.empty())
                     throw std::invalid_argument("[kernel] tabulated kernel needs matching non-empty grids");
                   if (k.xi.front() != 0.0) throw std::invalid_argument("[kernel] tabulated grid must start at 0");
                   for (std::size_t i = 1; i < k.xi.size(); ++i)
                     if (!(k.xi[i] > k.xi[i - 1]))
                       throw std::invalid_argument("[kernel] tabulated grid must be increasing");
                 },
             },
             form_);
}

double CorrelationKernel::density(double xi, double cutoff) const {
  const double r = std::abs(xi);
  return std::visit(overloaded{
                        [](const DiracKernel&) -> double {
                          throw std::logic_error("Dirac kernel has no density");
                        },
                        [&](const RieszKernel& k) { return std::pow(std::max(r, cutoff), -k.alpha); },
                        [&](const FractionalKernel& k) {
                          return k.h * (2.0 * k.h - 1.0) * std::pow(std::max(r, cutoff), 2.0 * k.h - 2.0);
                        },
                        [&](const TabulatedKernel& k) {
                          if (r >= k.xi.back()) return r == k.xi.back() ? k.density.back() : 0.0;
                          const auto it = std::upper_bound(k.xi.begin(), k.xi.end(), r);
                          const std::size_t j = static_cast<std::size_t>(it - k.xi.begin());
                          const double x0 = k.xi[j - 1], x1 = k.xi[j];
                          const double w = (r - x0) / (x1 - x0);
                          return (1.0 - w) * k.density[j - 1] + w * k.density[j];
                        },
                    },
                    form_);
}

double CorrelationKernel::resolved_cutoff(std::span<const double> nodes) const {
  double explicit_cutoff = 0.0;
  if (const auto* k = std::get_if<RieszKernel>(&form_)) explicit_cutoff = k->cutoff;
  if (const auto* k = std::get_if<FractionalKernel>(&form_)) explicit_cutoff = k->cutoff;
  if (explicit_cutoff > 0.0) return explicit_cutoff;
  const double spacing = min_spacing(nodes);
  return std::isfinite(spacing) ? 0.5 * spacing : 1.0;
}

Eigen::MatrixXd kernel_matrix(const CorrelationKernel& kernel, std::span<const double> nodes,
                              std::span<const double> weights) {
  if (nodes.size() != weights.size()) throw std::invalid_argument("nodes and weights differ in size");
  for (double w : weights)
    if (!(w > 0.0)) throw std::invalid_argument("quadrature weights must be positive");
  const auto n = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  if (const auto* d = std::get_if<DiracKernel>(&kernel.form())) {
    for (Eigen::Index i = 0; i < n; ++i) a(i, i) = d->c0 * weights[i];
    return a;
  }
  const double cutoff = kernel.resolved_cutoff(nodes);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = weights[i] * weights[j] * kernel.density(nodes[i] - nodes[j], cutoff);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a, double jitter) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  const double scale = n > 0 ? a.diagonal().cwiseAbs().maxCoeff() : 0.0;
  const double tol = 1e-9 * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) + jitter;
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d < -tol) throw std::runtime_error("kernel not admissible");
    if (d <= tol) {
      // a zero pivot of a semidefinite matrix forces a zero column below it
      for (Eigen::Index i = j + 1; i < n; ++i) {
        double s = a(i, j);
        for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
        if (std::abs(s) > std::sqrt(tol * scale) + tol) throw std::runtime_error("kernel not admissible");
      }
      continue;
    }
    const double pivot = std::sqrt(d);
    l(j, j) = pivot;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / pivot;
    }
  }
  return l;
}

double kernel_quadratic_form(const Eigen::MatrixXd& weighted_kernel, std::span<const double> h,
                             std::span<const double> g) {
  const auto n = weighted_kernel.rows();
  if (static_cast<std::size_t>(n) != h.size() || h.size() != g.size())
    throw std::invalid_argument("integrand size does not match kernel");
  const Eigen::Map<const Eigen::VectorXd> hv(h.data(), n);
  const Eigen::Map<const Eigen::VectorXd> gv(g.data(), n);
  return hv.dot(weighted_kernel * gv);
}

FieldIncrementPlan FieldIncrementPlan::build(const CorrelationKernel& kernel, std::vector<double> nodes,
                                             std::vector<double> weights, double time_step) {
  if (!(time_step > 0.0)) throw std::invalid_argument("time step must be positive");
  FieldIncrementPlan plan;
  plan.weighted_kernel = kernel_matrix(kernel, nodes, weights);
  const double max_diag = plan.weighted_kernel.size() ? plan.weighted_kernel.diagonal().maxCoeff() : 0.0;
  plan.kernel_cholesky = semidefinite_cholesky(plan.weighted_kernel, 1e-10 * max_diag);
  plan.xi_nodes = std::move(nodes);
  plan.xi_weights = std::move(weights);
  plan.time_step = time_step;
  return plan;
}

FieldIncrementPlan FieldIncrementPlan::white_noise(double time_step, double c0) {
  return build(CorrelationKernel::dirac(c0, 0), {0.0}, {1.0}, time_step);
}

std::vector<double> FieldIncrementPlan::sample(const std::function<double(double)>& h) const {
  std::vector<double> out(xi_nodes.size());
  for (std::size_t i = 0; i < xi_nodes.size(); ++i) out[i] = h(xi_nodes[i]);
  return out;
}

Eigen::VectorXd draw_field(const FieldIncrementPlan& plan, RandomStream& gaussian) {
  const auto n = static_cast<Eigen::Index>(plan.size());
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = gaussian.normal();
  Eigen::VectorXd draw = plan.kernel_cholesky.triangularView<Eigen::Lower>() * z;
  return std::sqrt(plan.time_step) * draw;
}

double field_integral(std::span<const double> h_on_nodes, const Eigen::VectorXd& draw) {
  double s = 0.0;
  for (std::size_t i = 0; i < h_on_nodes.size(); ++i) s += h_on_nodes[i] * draw(static_cast<Eigen::Index>(i));
  return s;
}

double gaussian_increment(const FieldIncrementPlan& plan, const std::function<double(double)>& h,
                          RandomStream& gaussian) {
  const auto hv = plan.sample(h);
  for (double v : hv)
    if (!std::isfinite(v)) throw std::invalid_argument("integrand not finite on quadrature nodes");
  return field_integral(hv, draw_field(plan, gaussian));
}

// ---------------------------------------------------------------------------

void gauss_laguerre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("quadrature_nodes must be at least 1");
  // Golub–Welsch on the Jacobi matrix of the Laguerre polynomials.
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    j(k, k) = 2.0 * k + 1.0;
    if (k + 1 < n) {
      j(k, k + 1) = k + 1.0;
      j(k + 1, k) = k + 1.0;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
  nodes.resize(n);
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    // Newton polish on L_n using the three-term recurrence.
    double x = es.eigenvalues()(k);
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = 1.0 - x;
      for (int m = 1; m < n; ++m) {
        const double p2 = ((2.0 * m + 1.0 - x) * p1 - m * p0) / (m + 1.0);
        p0 = p1;
        p1 = p2;
      }
      x -= p1 / (n * (p1 - p0) / x);
    }
    double p0 = 1.0, p1 = 1.0 - x;
    for (int m = 1; m < n + 1; ++m) {
      const double p2 = ((2.0 * m + 1.0 - x) * p1 - m * p0) / (m + 1.0);
      p0 = p1;
      p1 = p2;
    }
    // w_k = x_k / ((n+1)^2 L_{n+1}(x_k)^2)
    nodes[k] = x;
    weights[k] = x / ((n + 1.0) * (n + 1.0) * p1 * p1);
  }
}

LevyMeasure::LevyMeasure(Form form, int quadrature_nodes) : form_(std::move(form)) {
  std::visit(overloaded{
                 [&](const ExponentialDensity& m) {
                   if (m.zeta < 0.0) throw std::invalid_argument("[levy_measure] zeta: positive real required");
                   if (m.varpi < 0.0) throw std::invalid_argument("[levy_measure] varpi: positive real required");
                   if (m.zeta == 0.0 || m.varpi == 0.0) return;  // degenerate: null measure
                   total_mass_ = m.zeta;
                   gauss_laguerre(quadrature_nodes, nodes_, weights_);
                   for (std::size_t k = 0; k < nodes_.size(); ++k) {
                     nodes_[k] *= m.varpi;
                     weights_[k] *= m.zeta;
                   }
                 },
                 [&](const PointMass& m) {
                   if (m.z < 0.0) throw std::invalid_argument("[levy_measure] z: positive real required");
                   if (m.z == 0.0) return;
                   total_mass_ = m.z;
                   nodes_ = {1.0};
                   weights_ = {m.z};
                 },
                 [&](const GammaSheet& m) {
                   if (!(m.z > 0.0)) throw std::invalid_argument("[levy_measure] z: positive real required");
                   total_mass_ = std::numeric_limits<double>::infinity();
                 },
                 [&](const TabulatedMeasure& m) {
                   if (m.nodes.size() != m.weights.size())
                     throw std::invalid_argument("[levy_measure] tabulated nodes and weights differ in size");
                   nodes_ = m.nodes;
                   weights_ = m.weights;
                   double acc = 0.0;
                   for (double w : weights_) {
                     if (w < 0.0) throw std::invalid_argument("[levy_measure] tabulated weights must be nonnegative");
                     acc += w;
                     cumulative_.push_back(acc);
                   }
                   total_mass_ = acc;
                 },
             },
             form_);
}

bool LevyMeasure::finite_activity() const { return std::isfinite(total_mass_); }

double LevyMeasure::integrate(const std::function<double(double)>& g) const {
  if (!finite_activity()) throw std::domain_error("finite-activity required");
  double s = 0.0;
  for (std::size_t k = 0; k < nodes_.size(); ++k) s += weights_[k] * g(nodes_[k]);
  return s;
}

double LevyMeasure::sample_mark(RandomStream& marks) const {
  return std::visit(overloaded{
                        [&](const ExponentialDensity& m) { return marks.exponential(m.varpi); },
                        [](const PointMass&) { return 1.0; },
                        [](const GammaSheet&) -> double { throw std::domain_error("finite-activity required"); },
                        [&](const TabulatedMeasure& m) {
                          const double u = marks.uniform() * total_mass_;
                          auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
                          if (it == cumulative_.end()) --it;
                          return m.nodes[static_cast<std::size_t>(it - cumulative_.begin())];
                        },
                    },
                    form_);
}

double LevyMeasure::max_node() const {
  double best = 0.0;
  for (double x : nodes_) best = std::max(best, std::abs(x));
  return best;
}

std::vector<Jump> sample_jumps(const LevyMeasure& measure, double t, double dt, PathStreams& streams) {
  if (!measure.finite_activity()) throw std::domain_error("finite-activity required");
  std::vector<Jump> jumps;
  if (dt <= 0.0 || measure.is_null()) return jumps;
  const auto count = streams.poisson_count.poisson(measure.total_mass() * dt);
  jumps.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    const double time = t + dt * streams.poisson_times.uniform();
    jumps.push_back({time, measure.sample_mark(streams.poisson_marks)});
  }
  std::sort(jumps.begin(), jumps.end(), [](const Jump& a, const Jump& b) { return a.time < b.time; });
  return jumps;
}

double compensated_integral(std::span<const Jump> jumps, const std::function<double(double)>& g,
                            double compensator_rate, double dt) {
  double s = 0.0;
  for (const Jump& j : jumps) s += g(j.mark);
  return s - dt * compensator_rate;
}

double compensated_integral(std::span<const Jump> jumps, const std::function<double(double)>& g,
                            const LevyMeasure& measure, double dt) {
  return compensated_integral(jumps, g, measure.integrate(g), dt);
}

} // namespace lrf
