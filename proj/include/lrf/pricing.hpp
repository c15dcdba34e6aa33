#pragma once

// Defaultable zero-coupon bond under recovery of face value:
//   P(t,T) = 1{tau>t} [ int_T^inf K1 dtheta + int_t^T K2 alpha_t / S_t dtheta ]
//          + 1{tau<=t} K2(t, tau).

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lrf/pide.hpp"
#include "lrf/term_structure.hpp"

namespace lrf {

struct DeterministicRecovery {
  std::function<double(double)> R = [](double) { return 0.4; };
};

/// R_T(theta) = w0 + w1 e^{-f(lambda_T(theta))}.
struct IntensityLinkedRecovery {
  double w0 = 0.0;
  double w1 = 0.0;
  std::function<double(double)> f = [](double y) { return y; };
  std::string f_name = "identity";
};

class RecoveryModel {
public:
  using Form = std::variant<DeterministicRecovery, IntensityLinkedRecovery>;
  explicit RecoveryModel(Form form);
  static RecoveryModel constant(double R);

  const Form& form() const { return form_; }
  bool deterministic() const { return std::holds_alternative<DeterministicRecovery>(form_); }
  /// Checks R(theta) in [0,1] on the grid for deterministic recovery.
  void validate_on(const std::vector<double>& theta) const;

private:
  Form form_;
};

struct Alive {
  double t = 0.0;
};
struct Defaulted {
  double tau = 0.0;
};
using DefaultStatus = std::variant<Alive, Defaulted>;

enum class Regime { Independent, Correlated };
Regime parse_regime(const std::string& s);

/// Market state at time t along one path.
struct PricingState {
  double t = 0.0;
  double r = 0.0;
  std::vector<double> theta;
  std::vector<double> lambda;
  std::vector<double> survival;
  std::vector<double> alpha;

  static PricingState from(const DensityCurveState& curves, double r);
  /// S_t = S_t(t).
  double azema() const;
};

struct PricingContext {
  Regime regime = Regime::Independent;
  double T = 1.0;
  /// Default-free bond B(t,T); used by the independent regime and the
  /// small-intensity limit.
  double B = 1.0;
  KernelSolver* solver = nullptr;
  /// Maturities at which PIDEs are solved in the correlated regime; other
  /// theta are interpolated linearly. Empty: solve at every requested theta.
  std::vector<double> theta_nodes;
  double lambda_floor = 1e-10;
};

double kernel_K1(double theta, const PricingState& state, const PricingContext& ctx);
double kernel_K2(double theta, const PricingState& state, const RecoveryModel& recovery, const PricingContext& ctx);

struct PriceBreakdown {
  double price = 0.0;
  double survival_part = 0.0;
  double recovery_part = 0.0;
  double tail_correction = 0.0;
};

PriceBreakdown price_defaultable_zcb(const DefaultStatus& status, const PricingState& state,
                                     const RecoveryModel& recovery, const PricingContext& ctx);

/// B(t,T) (1 - (1-R) sum_{t<theta<=T} alpha / (sum_{t<theta<=theta_max} alpha + tail)),
/// sums are Delta * alpha(i Delta) on a uniform grid from 0. `tail` approximates
/// int_{theta_max}^inf alpha_t (pass S_t(theta_max) for a flat extension, 0 for
/// the bare finite sum).
double price_pre_default_independent(double t, double T, const std::vector<double>& theta,
                                     const std::vector<double>& alpha, double R, double r, double tail = 0.0);

/// Closed form of the deterministic flat-intensity price.
double deterministic_flat_price(double t, double T, double r, double R, double lambda_bar);

} // namespace lrf
