#pragma once

// Backward Cauchy problem  dK/dt - x K + A_theta K = 0  on a rectangular
// (x = short rate, y = forward intensity) grid.
//
// Local terms (diffusion, drift, discounting) are treated by a theta-scheme
// (Crank–Nicolson by default) with a sparse LU solve per step; the nonlocal
// jump integral is explicit, or iterated to a fixed point in Picard mode.

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "lrf/levy_field.hpp"
#include "lrf/rates.hpp"
#include "lrf/term_structure.hpp"

namespace lrf {

/// Sign of the Gaussian term in delta_hat. `Derived` follows from the
/// Girsanov shift of the rate under Q^theta; `AsPrinted` flips it.
enum class DeltaHatSign { Derived, AsPrinted };

/// Which measure compensates the jump term of the operator: nu as printed, or
/// the Q^theta compensator e^{-I_gamma} nu.
enum class JumpCompensator { AsPrinted, MeasureChanged };

DeltaHatSign parse_delta_hat_sign(const std::string& s);
JumpCompensator parse_jump_compensator(const std::string& s);
std::string to_string(DeltaHatSign s);
std::string to_string(JumpCompensator s);

struct OperatorCoefficients {
  double kappa = 0.0;
  double delta_hat = 0.0;
  double a_drift = 0.0;
  double a11 = 0.0;
  double a22 = 0.0;
  double a12 = 0.0;
  /// Jump quadrature: weights (already including e^{-I_gamma} when the
  /// measure-changed compensator is selected), phi and gamma on the nodes.
  std::vector<double> jump_weight;
  std::vector<double> jump_x;
  std::vector<double> jump_y;

  double jump_mass() const;
  /// a11 a22 >= a12^2 / 4 - eps.
  bool elliptic(double eps = 0.0) const { return a11 * a22 >= 0.25 * a12 * a12 - eps; }
};

struct CoefficientOptions {
  DeltaHatSign delta_hat_sign = DeltaHatSign::Derived;
  JumpCompensator jump_compensator = JumpCompensator::MeasureChanged;
};

OperatorCoefficients compute_coefficients(const CoefficientSpec& model, const VasicekSpec& rates,
                                          const FieldIncrementPlan& field, const LevyMeasure& measure, double t,
                                          double theta, CoefficientOptions options = {});

using CoefficientProvider = std::function<OperatorCoefficients(double t)>;

struct StateGrid {
  double x_min = -0.1, x_max = 0.3;
  int nx = 64;
  double y_min = 0.0, y_max = 0.4;
  int ny = 64;

  StateGrid() = default;
  StateGrid(double x0, double x1, int nx_, double y0, double y1, int ny_);
  double hx() const { return (x_max - x_min) / (nx - 1); }
  double hy() const { return (y_max - y_min) / (ny - 1); }
  double x(int i) const { return x_min + i * hx(); }
  double y(int j) const { return y_min + j * hy(); }
  std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  bool contains(double x, double y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
};

struct GridFunction {
  StateGrid grid;
  Eigen::VectorXd values;
  double time = 0.0;

  static GridFunction from(const StateGrid& grid, const std::function<double(double, double)>& f, double time);
  double at(int i, int j) const { return values(static_cast<Eigen::Index>(grid.index(i, j))); }
  /// Bilinear interpolation; linear extrapolation outside the grid.
  double interpolate(double x, double y) const;
};

/// Pointwise int [K(x+phi, y+gamma) - K - phi K_x - gamma K_y] dnu by the
/// coefficient quadrature.
GridFunction apply_jump_operator(const GridFunction& k, const OperatorCoefficients& coeffs);

struct PideConfig {
  int nx = 128;
  int ny = 128;
  double x_min = -0.1, x_max = 0.3;
  double y_min = 0.0, y_max = 0.4;
  int n_steps = 200;
  double ridge_eps = 1e-8;
  bool picard_mode = false;
  double time_theta = 0.5;  // 0.5 Crank–Nicolson, 1 implicit Euler

  StateGrid grid() const { return {x_min, x_max, nx, y_min, y_max, ny}; }
};

struct SolveReport {
  int degenerate_steps = 0;   // steps where a11 a22 < a12^2 / 4 (before ridge)
  int refactorizations = 0;
  int picard_iterations = 0;
  double max_growth = 0.0;    // largest per-step sup-norm ratio seen
};

/// Backward time stepping from T to t_start. Throws std::runtime_error on
/// detected instability, and std::invalid_argument when the explicit jump
/// term violates dt * nu_total <= 1.
GridFunction solve_cauchy(const std::function<double(double, double)>& terminal, const PideConfig& config,
                          double t_start, double T, const CoefficientProvider& coeffs, SolveReport* report = nullptr);

/// Everything needed to evaluate pricing kernels for one model.
struct KernelModel {
  CoefficientSpec intensity;
  VasicekSpec rates;
  FieldIncrementPlan field;
  LevyMeasure measure = LevyMeasure::none();
  CoefficientOptions options;
  PideConfig pide;
};

/// Caches PIDE solutions per (theta, T, t, terminal tag). Safe to share
/// across threads.
class KernelSolver {
public:
  explicit KernelSolver(KernelModel model) : model_(std::move(model)) {}

  const KernelModel& model() const { return model_; }

  /// Solution grid at time t for terminal `tag` ("y" or "yexp-f" variants).
  std::shared_ptr<const GridFunction> solution(double t, double T, double theta, const std::string& tag,
                                               const std::function<double(double, double)>& terminal);

  std::size_t cached() const;

private:
  KernelModel model_;
  mutable std::mutex mutex_;
  std::map<std::tuple<double, double, double, std::string>, std::shared_ptr<const GridFunction>> cache_;
};

/// K_breve(t, r, lambda): terminal psi(x, y) = y.
double kernel_K_breve(KernelSolver& solver, double t, double T, double r, double lambda, double theta);

/// K_tilde(t, r, lambda): terminal y e^{-f(y)}; `f_name` tags the cache.
double kernel_K_tilde(KernelSolver& solver, double t, double T, double r, double lambda, double theta,
                      const std::function<double(double)>& f, const std::string& f_name);

/// Monte Carlo estimate under Q of
///   E[psi(lambda_T(theta)) exp(-int_0^theta (lambda_T - lambda_t)) exp(-int_t^T r)]
/// starting from (r, lambda) at t. This is E_Q[alpha_T psi / lambda_T ...] / S_t
/// computed without any change of measure. Paths are shared between probes.
struct KernelProbe {
  double r = 0.0;
  double lambda = 0.0;
  double mean = 0.0;
  double se = 0.0;
};

void monte_carlo_kernel(const KernelModel& model, double t, double T, double theta, std::vector<KernelProbe>& probes,
                        std::size_t n_paths, std::uint64_t seed, double dt,
                        const std::function<double(double)>& psi = [](double y) { return y; },
                        double theta_step = 0.01);

} // namespace lrf
