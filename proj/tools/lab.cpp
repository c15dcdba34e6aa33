// lab: command-line front end.
//
//   lab simulate   --config c.cfg --out dir [--route density|lambda] [--path N]
//   lab price      --config c.cfg --out dir
//   lab pide       --config c.cfg --out dir
//   lab experiment section7 --config c.cfg --out dir
//   lab kde        --input prices.csv --out dir
//   lab verify     --config c.cfg --out dir

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrf/cli.hpp"
#include "lrf/experiments.hpp"
#include "lrf/pide.hpp"
#include "lrf/pricing.hpp"

namespace fs = std::filesystem;
using namespace lrf;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::string format = "csv";
};

LabConfig load(const Common& opt) {
  LabConfig c = opt.config_path.empty() ? parse_config_text("") : parse_config(opt.config_path);
  c.experiment.seed = resolve_seed(c.experiment.seed, std::getenv("LAB_SEED"), opt.seed);
  if (opt.workers) c.experiment.workers = *opt.workers;
  if (opt.format != "csv") throw std::invalid_argument("--format: only csv is supported");
  c.validate();
  return c;
}

// Doubles with 17 significant digits so reruns are byte-identical and
// values round-trip.
class Csv {
public:
  Csv(const fs::path& path, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_.precision(17);
    out_ << header << "\n";
  }
  template <class... Ts>
  void row(const Ts&... xs) {
    bool first = true;
    ((out_ << (first ? "" : ",") << xs, first = false), ...);
    out_ << "\n";
  }

private:
  std::ofstream out_;
};

struct Run {
  RunManifest manifest;
  fs::path dir;

  Run(const LabConfig& c, const Common& opt, std::string command) : dir(opt.out_dir) {
    fs::create_directories(dir);
    manifest.config_hash = config_hash(c);
    manifest.seed = c.experiment.seed;
    manifest.command = std::move(command);
    manifest.started_at = utc_now();
  }
  fs::path file(const std::string& name) {
    manifest.outputs.push_back(name);
    return dir / name;
  }
  void finish() {
    manifest.finished_at = utc_now();
    manifest.write(dir);
  }
};

std::vector<double> kde_grid(const std::vector<double>& samples, int points) {
  const double h = kde_bandwidth(samples);
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double a = *lo - 4.0 * h, b = *hi + 4.0 * h;
  std::vector<double> x(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) x[static_cast<std::size_t>(i)] = a + (b - a) * i / (points - 1);
  return x;
}

void write_kde(Run& run, const std::vector<double>& samples, int points) {
  const auto x = kde_grid(samples, points);
  const auto f = kde(samples, x);
  Csv csv(run.file("kde.csv"), "x,f");
  for (std::size_t i = 0; i < x.size(); ++i) csv.row(x[i], f[i]);
}

int cmd_simulate(const Common& opt, const std::string& route, std::optional<std::uint64_t> path_opt) {
  const LabConfig c = load(opt);
  Run run(c, opt, "simulate");
  const std::uint64_t path = path_opt.value_or(c.experiment.path);
  const ExperimentConfig e = build_experiment(c);
  DensityCurveState curves;
  if (route == "density") {
    curves = Section7Simulator(e).curves(path);
  } else {
    const auto theta = make_theta_grid(e.delta, resolve_theta_max(e.theta_max_rule, e.lambda_bar));
    const CoefficientSpec spec = CoefficientSpec::section7(e.sigma, e.b, e.lambda_bar);
    IntensityOptions io;
    io.clamp_lambda_at_zero = c.model.clamp_lambda_at_zero;
    io.drift_evaluation = c.model.drift_evaluation == "quadrature" ? DriftEvaluation::Quadrature : DriftEvaluation::Auto;
    const IntensityModel model(spec, build_field_plan(c, e.delta_t), build_levy_measure(c), theta, e.t, io);
    ForwardCurveState state = ForwardCurveState::initial(spec, theta, e.seed, path);
    PathStreams streams(e.seed, path);
    const auto steps = static_cast<std::size_t>(std::llround(e.t / e.delta_t));
    for (std::size_t k = 0; k < steps; ++k) state = evolve_intensity(state, model, streams);
    curves = DensityCurveState::from_intensity(state);
  }
  Csv csv(run.file("curves.csv"), "t,theta,lambda,S,alpha,path");
  for (std::size_t i = 0; i < curves.theta.size(); ++i)
    csv.row(curves.t, curves.theta[i], curves.lambda[i], curves.survival[i], curves.alpha[i], path);
  run.finish();
  std::cout << "simulate: route=" << route << " path=" << path << " t=" << curves.t << " -> " << run.dir.string() << "\n";
  return 0;
}

int cmd_price(const Common& opt) {
  const LabConfig c = load(opt);
  Run run(c, opt, "price");
  if (c.pricing.regime == "independent") {
    const ExperimentConfig e = build_experiment(c);
    const PriceDistribution d = run_price_distribution(e);
    {
      // pre-default prices only; flagged marks paths with a negative density value
      Csv csv(run.file("prices.csv"), "path,t,T,status,price,flagged");
      for (std::size_t i = 0; i < d.prices.size(); ++i)
        csv.row(d.paths[i], e.t, e.T, "alive", d.prices[i], d.flagged[i] ? 1 : 0);
    }
    const SampleStats st = sample_stats(d.prices);
    {
      Csv csv(run.file("summary.csv"), "mean,se,skewness,flagged_fraction,rejected");
      csv.row(st.mean, st.se, st.skewness, d.flagged_fraction(), d.rejected);
    }
    run.finish();
    std::cout << "price: mean=" << st.mean << " se=" << st.se << " flagged_fraction=" << d.flagged_fraction()
              << " rejected=" << d.rejected << "\n";
    return 0;
  }
  // Correlated regime: price at time 0 on the flat initial curve with r = r0.
  const ExperimentConfig e = build_experiment(c);
  LabConfig shifted = c;
  shifted.experiment.t = 0.0;
  KernelSolver solver(build_kernel_model(shifted));
  const auto theta = make_theta_grid(e.delta, resolve_theta_max(e.theta_max_rule, e.lambda_bar));
  const DensityCurveState flat = DensityCurveState::flat(theta, e.lambda_bar);
  const PricingState state = PricingState::from(flat, c.rates.r0);
  PricingContext ctx;
  ctx.regime = Regime::Correlated;
  ctx.T = e.T;
  ctx.B = zcb_closed_form(build_rates(c), solver.model().field, 0.0, e.T, c.rates.r0,
                          parse_vasicek_formula(c.rates.vasicek_formula));
  ctx.solver = &solver;
  const int n = c.pide.theta_nodes;
  for (int i = 0; i < n; ++i) ctx.theta_nodes.push_back(theta.back() * i / (n - 1));
  const RecoveryModel recovery = build_recovery(c);
  recovery.validate_on(theta);
  const PriceBreakdown p = price_defaultable_zcb(Alive{0.0}, state, recovery, ctx);
  {
    Csv csv(run.file("prices.csv"), "path,t,T,status,price,survival_part,recovery_part,tail_correction");
    csv.row(0, 0.0, e.T, "alive", p.price, p.survival_part, p.recovery_part, p.tail_correction);
  }
  run.finish();
  std::cout << "price (correlated, t=0): " << p.price << "\n";
  return 0;
}

int cmd_pide(const Common& opt) {
  const LabConfig c = load(opt);
  Run run(c, opt, "pide");
  const KernelModel model = build_kernel_model(c);
  const double theta = c.pide.theta, t = c.experiment.t, T = c.experiment.T;
  SolveReport report;
  CoefficientProvider provider = [&](double u) {
    return compute_coefficients(model.intensity, model.rates, model.field, model.measure, u, theta, model.options);
  };
  const GridFunction k = solve_cauchy([](double, double y) { return y; }, model.pide, t, T, provider, &report);
  {
    Csv csv(run.file("kernel.csv"), "x,y,K");
    for (int j = 0; j < k.grid.ny; ++j)
      for (int i = 0; i < k.grid.nx; ++i) csv.row(k.grid.x(i), k.grid.y(j), k.at(i, j));
  }
  run.finish();
  std::cout << "pide: theta=" << theta << " t=" << t << " T=" << T << " refactorizations=" << report.refactorizations
            << " degenerate_steps=" << report.degenerate_steps << "\n";
  return 0;
}

int cmd_experiment(const Common& opt) {
  const LabConfig c = load(opt);
  Run run(c, opt, "experiment section7");
  const ExperimentConfig e = build_experiment(c);
  const PriceDistribution d = run_price_distribution(e);
  {
    Csv csv(run.file("prices.csv"), "path,price");
    for (std::size_t i = 0; i < d.prices.size(); ++i) csv.row(d.paths[i], d.prices[i]);
  }
  const SampleStats st = sample_stats(d.prices);
  if (st.sd > 0.0 && d.prices.size() > 1) write_kde(run, d.prices, c.experiment.kde_points);
  std::cout << "experiment: n=" << st.n << " mean=" << st.mean << " se=" << st.se << " skewness=" << st.skewness
            << " flagged_fraction=" << d.flagged_fraction() << " rejected=" << d.rejected << "\n";
  if (!c.experiment.sweep_axis.empty()) {
    const SweepAxis axis = parse_sweep_axis(c.experiment.sweep_axis);
    const auto rows = sweep(e, axis, c.experiment.sweep_values);
    Csv csv(run.file("sweep_" + c.experiment.sweep_axis + ".csv"), "value,mean,se,flagged_fraction");
    for (const auto& r : rows) {
      csv.row(r.value, r.mean, r.se, r.flagged_fraction);
      std::cout << "  " << c.experiment.sweep_axis << "=" << r.value << " mean=" << r.mean << " se=" << r.se
                << " flagged_fraction=" << r.flagged_fraction << "\n";
    }
  }
  run.finish();
  return 0;
}

std::vector<double> read_prices(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string h;
    while (std::getline(ss, h, ',')) header.push_back(h);
  }
  const auto it = std::find(header.begin(), header.end(), "price");
  const std::size_t col = it == header.end() ? 0 : static_cast<std::size_t>(it - header.begin());
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t i = 0; i <= col && std::getline(ss, cell, ','); ++i) {
    }
    out.push_back(std::stod(cell));
  }
  return out;
}

int cmd_kde(const Common& opt, const std::string& input) {
  const LabConfig c = load(opt);
  Run run(c, opt, "kde");
  write_kde(run, read_prices(input), c.experiment.kde_points);
  run.finish();
  std::cout << "kde: " << input << " -> " << (run.dir / "kde.csv").string() << "\n";
  return 0;
}

int cmd_verify(const Common& opt) {
  const LabConfig c = load(opt);
  Run run(c, opt, "verify");
  const VerifyReport report = run_verify(c);
  std::ofstream(run.file("verify.txt")) << report.to_text();
  std::ofstream(run.file("verify.json")) << report.to_json();
  run.finish();
  std::cout << report.to_text();
  return report.all_passed() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Levy random field default-density laboratory"};
  app.require_subcommand(1);
  Common opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_option("--seed", opt.seed, "base seed (overrides LAB_SEED and the config)");
    sub->add_option("--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--format", opt.format, "output format")->check(CLI::IsMember({"csv"}));
  };

  std::string route = "density";
  std::optional<std::uint64_t> path;
  auto* simulate = app.add_subcommand("simulate", "simulate one path of the term structure");
  add_common(simulate);
  simulate->add_option("--route", route, "density or lambda")->check(CLI::IsMember({"density", "lambda"}));
  simulate->add_option("--path", path, "path index");

  auto* price = app.add_subcommand("price", "defaultable bond prices");
  add_common(price);
  auto* pide = app.add_subcommand("pide", "solve the pricing-kernel PIDE");
  add_common(pide);

  std::string which;
  auto* experiment = app.add_subcommand("experiment", "Monte Carlo experiments");
  add_common(experiment);
  experiment->add_option("name", which, "experiment name")->required()->check(CLI::IsMember({"section7"}));

  std::string input;
  auto* kde_cmd = app.add_subcommand("kde", "kernel density estimate of a price sample");
  add_common(kde_cmd);
  kde_cmd->add_option("--input", input, "CSV with a price column")->required()->check(CLI::ExistingFile);

  auto* verify = app.add_subcommand("verify", "run the oracle checks");
  add_common(verify);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*simulate) return cmd_simulate(opt, route, path);
    if (*price) return cmd_price(opt);
    if (*pide) return cmd_pide(opt);
    if (*experiment) return cmd_experiment(opt);
    if (*kde_cmd) return cmd_kde(opt, input);
    if (*verify) return cmd_verify(opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
