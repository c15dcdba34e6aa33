#pragma once

// Lévy random field = kernel-correlated Gaussian field Y^G plus an
// independent compensated Poisson random measure Y^P.
//
// The Gaussian field is never materialised. We only simulate its stochastic
// integrals over one time step: the parameter space is discretised by a
// quadrature rule {xi_i, w_i}, and the increments on the nodes are drawn
// jointly with covariance dt * w_i w_j c(xi_i - xi_j).

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "lrf/rng.hpp"

namespace lrf {

// ---------------------------------------------------------------------------
// Correlation kernels

/// Atom at the origin: white noise (Brownian sheet), c = c0 * delta_0.
struct DiracKernel {
  double c0 = 1.0;
};

/// c(xi) = |xi|^-alpha with 0 < alpha < d. A cutoff of 0 means "half the
/// minimal node spacing", resolved when a kernel matrix is built.
struct RieszKernel {
  double alpha = 0.5;
  double cutoff = 0.0;
};

/// c(xi) = h (2h - 1) |xi|^(2h - 2), 1/2 < h < 1, d = 1.
struct FractionalKernel {
  double h = 0.75;
  double cutoff = 0.0;
};

/// Symmetric density given on a half-grid 0 = xi_0 < xi_1 < ...; evaluated at
/// |xi| by linear interpolation and zero beyond the last node, so
/// c(xi) == c(-xi) holds exactly.
struct TabulatedKernel {
  std::vector<double> xi;
  std::vector<double> density;
};

class CorrelationKernel {
public:
  using Form = std::variant<DiracKernel, RieszKernel, FractionalKernel, TabulatedKernel>;

  explicit CorrelationKernel(Form form, int dimension = 1);

  static CorrelationKernel dirac(double c0 = 1.0, int dimension = 0) {
    return CorrelationKernel(DiracKernel{c0}, dimension);
  }

  const Form& form() const { return form_; }
  int dimension() const { return dimension_; }
  bool is_dirac() const { return std::holds_alternative<DiracKernel>(form_); }

  /// Density value c(xi) for the non-atomic kernels. Singular kernels are
  /// evaluated at max(|xi|, cutoff). Throws for the Dirac kernel.
  double density(double xi, double cutoff) const;

  /// Cutoff actually used for a node set (explicit one, or half the minimal
  /// node spacing).
  double resolved_cutoff(std::span<const double> nodes) const;

private:
  Form form_;
  int dimension_;
};

/// Matrix with entries w_i w_j c(xi_i - xi_j); diagonal c0 * w_i for Dirac.
Eigen::MatrixXd kernel_matrix(const CorrelationKernel& kernel, std::span<const double> nodes,
                              std::span<const double> weights);

/// Lower-triangular L with L L^T = A + jitter * I for symmetric positive
/// semidefinite A. Zero pivots (up to round-off) produce zero columns instead
/// of failing. Throws std::runtime_error("kernel not admissible") when A is
/// materially indefinite.
Eigen::MatrixXd semidefinite_cholesky(const Eigen::MatrixXd& a, double jitter);

/// Quadratic form h^T A h of the weighted kernel matrix; the variance per unit
/// time of the Gaussian integral of h.
double kernel_quadratic_form(const Eigen::MatrixXd& weighted_kernel, std::span<const double> h,
                             std::span<const double> g);

// ---------------------------------------------------------------------------
// Gaussian increments

struct FieldIncrementPlan {
  std::vector<double> xi_nodes;
  std::vector<double> xi_weights;
  Eigen::MatrixXd weighted_kernel;
  Eigen::MatrixXd kernel_cholesky;
  double time_step = 0.0;

  static FieldIncrementPlan build(const CorrelationKernel& kernel, std::vector<double> nodes,
                                  std::vector<double> weights, double time_step);

  /// d = 0 analogue of the Dirac field: a single node carrying a standard
  /// Brownian motion.
  static FieldIncrementPlan white_noise(double time_step, double c0 = 1.0);

  std::size_t size() const { return xi_nodes.size(); }

  /// Evaluate an integrand on the nodes.
  std::vector<double> sample(const std::function<double(double)>& h) const;
};

/// One joint draw of the node increments sqrt(dt) * L * Z. Every stochastic
/// integral over the same step is a linear functional of this vector.
Eigen::VectorXd draw_field(const FieldIncrementPlan& plan, RandomStream& gaussian);

/// Integral of h over the step given a node draw.
double field_integral(std::span<const double> h_on_nodes, const Eigen::VectorXd& draw);

/// Sample of the integral of h against Y^G over one step.
double gaussian_increment(const FieldIncrementPlan& plan, const std::function<double(double)>& h,
                          RandomStream& gaussian);

// ---------------------------------------------------------------------------
// Lévy measures

/// (zeta / varpi) e^{-xi / varpi} on xi > 0; total mass zeta.
struct ExponentialDensity {
  double zeta = 10.0;
  double varpi = 1e-3;
};

/// z * delta_1 (Poisson sheet).
struct PointMass {
  double z = 1.0;
};

/// z e^{-xi} / xi on xi > 0 (Gamma sheet). Infinite activity: representable,
/// but rejected by every simulation and quadrature entry point.
struct GammaSheet {
  double z = 1.0;
};

struct TabulatedMeasure {
  std::vector<double> nodes;
  std::vector<double> weights;
};

class LevyMeasure {
public:
  using Form = std::variant<ExponentialDensity, PointMass, GammaSheet, TabulatedMeasure>;

  explicit LevyMeasure(Form form, int quadrature_nodes = 32);

  /// The null measure (no jumps).
  static LevyMeasure none() { return LevyMeasure(TabulatedMeasure{}); }

  const Form& form() const { return form_; }
  double total_mass() const { return total_mass_; }
  bool finite_activity() const;
  bool is_null() const { return total_mass_ == 0.0; }

  /// Quadrature representation: integral of g d(nu) ~ sum_k w_k g(x_k).
  std::span<const double> nodes() const { return nodes_; }
  std::span<const double> weights() const { return weights_; }

  /// Integral of g against nu by quadrature.
  double integrate(const std::function<double(double)>& g) const;

  /// Draw one mark from nu / total_mass.
  double sample_mark(RandomStream& marks) const;

  /// Largest quadrature node (used to size PIDE grids).
  double max_node() const;

private:
  Form form_;
  double total_mass_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;  // for tabulated sampling
};

struct Jump {
  double time;
  double mark;
};

/// Jumps of the Poisson random measure in (t, t + dt], ordered by time.
std::vector<Jump> sample_jumps(const LevyMeasure& measure, double t, double dt,
                               PathStreams& streams);

/// sum_jumps g(mark) - dt * integral g d(nu), compensator by quadrature.
double compensated_integral(std::span<const Jump> jumps, const std::function<double(double)>& g,
                            const LevyMeasure& measure, double dt);

/// Same, with a known compensator rate integral g d(nu) (closed forms).
double compensated_integral(std::span<const Jump> jumps, const std::function<double(double)>& g,
                            double compensator_rate, double dt);

/// Gauss–Laguerre rule for integral_0^inf f(u) e^{-u} du.
void gauss_laguerre(int n, std::vector<double>& nodes, std::vector<double>& weights);

} // namespace lrf
