#pragma once

// Monte Carlo experiments on the direct density dynamics: price samples,
// kernel density estimates and parameter sweeps.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lrf/term_structure.hpp"

namespace lrf {

/// How a path is evolved to time t. `Aggregated` sums the per-step
/// increments of the exponential scheme in closed form (same draws, same
/// result up to rounding); `Stepwise` calls evolve_density_direct per step.
enum class PathEvaluator { Auto, Aggregated, Stepwise };

struct ExperimentConfig {
  double t = 0.5;
  double T = 1.0;
  double r = 0.05;
  double R = 0.4;
  double b = 1.0;
  double zeta = 10.0;
  double varpi = 1e-3;
  double lambda_bar = 0.1;
  double sigma = 0.001;
  std::size_t n_paths = 10000;
  double delta = 0.01;
  double delta_t = 0.01;
  std::string theta_max_rule = "10/lambda";
  std::uint64_t seed = 20240601;
  unsigned workers = 1;
  JumpSign jump_sign = JumpSign::Section7;
  DensityScheme scheme = DensityScheme::Exponential;
  PathEvaluator evaluator = PathEvaluator::Auto;
  /// Add S_t(theta_max) to the denominator (flat extension of the curve).
  bool tail = true;
  int quadrature_nodes = 32;

  void validate() const;
};

struct PathPrice {
  double price = 0.0;
  bool flagged = false;   // alpha_t < 0 somewhere on the pricing range
  bool rejected = false;  // nonpositive denominator
};

class Section7Simulator {
public:
  explicit Section7Simulator(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  const Section7Dynamics& dynamics() const { return dynamics_; }
  const std::vector<double>& theta() const { return theta_; }
  std::size_t steps() const { return steps_; }
  bool aggregated() const { return aggregated_; }

  /// Curves at time t for one path.
  DensityCurveState curves(std::uint64_t path) const;
  DensityCurveState curves_stepwise(std::uint64_t path) const;
  DensityCurveState curves_aggregated(std::uint64_t path) const;

  PathPrice price(std::uint64_t path) const;

private:
  struct Curves {
    std::vector<double> lambda, survival, alpha;
    std::size_t negative_alpha = 0;
  };
  void aggregate_into(std::uint64_t path, Curves& out) const;

  ExperimentConfig config_;
  Section7Dynamics dynamics_;
  std::vector<double> theta_;
  std::size_t steps_ = 0;
  bool aggregated_ = false;
  std::vector<double> times_;       // left points t_k
  std::vector<double> drift_lambda_; // per theta, summed deterministic increments
  std::vector<double> drift_log_;
  std::vector<double> drift_survival_;  // exp(drift_log_)
};

struct PriceDistribution {
  /// Accepted prices in path order, with their path indices.
  std::vector<double> prices;
  std::vector<std::uint64_t> paths;
  std::vector<bool> flagged;
  std::size_t rejected = 0;

  std::size_t flagged_count() const;
  double flagged_fraction() const;
};

PriceDistribution run_price_distribution(const ExperimentConfig& config);

struct SampleStats {
  double mean = 0.0;
  double se = 0.0;
  double sd = 0.0;
  double skewness = 0.0;
  std::size_t n = 0;
};

SampleStats sample_stats(const std::vector<double>& x);

/// Silverman bandwidth 1.06 s k^{-1/5}.
double kde_bandwidth(const std::vector<double>& samples);
std::vector<double> kde(const std::vector<double>& samples, const std::vector<double>& x_grid);

enum class SweepAxis { Varpi, Lambda, t, T };
SweepAxis parse_sweep_axis(const std::string& s);
std::string to_string(SweepAxis a);

struct SweepRow {
  double value = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double flagged_fraction = 0.0;
  double skewness = 0.0;
  std::size_t rejected = 0;
  std::vector<double> prices;
};

/// One run_price_distribution per value; cell i uses derive_seed(seed, i).
std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<double>& values,
                            bool keep_prices = false);

/// Fraction of `x` strictly above `level`.
double tail_mass_above(const std::vector<double>& x, double level);

struct MartingaleCell {
  double theta = 0.0;
  double initial = 0.0;
  double mean = 0.0;
  double se = 0.0;
  bool within(double n_se) const;
};

/// Path mean of alpha_t(theta) against alpha_0(theta).
std::vector<MartingaleCell> density_martingale_check(const ExperimentConfig& config, const std::vector<double>& thetas);

} // namespace lrf
