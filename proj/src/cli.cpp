#include "lrf/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lrf {

const char* const kVersionTag = "lrf-0.1.0";

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& section, const std::string& key, const std::string& what) {
  throw std::invalid_argument("[" + section + "] " + key + ": " + what);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double read_double(const std::string& section, const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    bad(section, key, "real number expected, got '" + v + "'");
  return out;
}

template <class Int>
Int read_int(const std::string& section, const std::string& key, const std::string& v) {
  Int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) bad(section, key, "integer expected, got '" + v + "'");
  return out;
}

bool read_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(section, key, "true or false expected, got '" + v + "'");
}

struct Binding {
  std::string section;
  std::string key;
  std::function<void(LabConfig&, const std::string&)> set;
  std::function<std::string(const LabConfig&)> get;
};

template <class S, class T>
Binding bind(const char* section, const char* key, S LabConfig::*sec, T S::*member) {
  Binding b;
  b.section = section;
  b.key = key;
  const std::string s = section, k = key;
  b.set = [=](LabConfig& c, const std::string& v) {
    T& slot = c.*sec.*member;
    if constexpr (std::is_same_v<T, double>)
      slot = read_double(s, k, v);
    else if constexpr (std::is_same_v<T, bool>)
      slot = read_bool(s, k, v);
    else if constexpr (std::is_same_v<T, std::string>)
      slot = v;
    else if constexpr (std::is_same_v<T, std::vector<double>>) {
      slot.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) slot.push_back(read_double(s, k, item));
      }
    } else {
      if (!v.empty() && v[0] == '-') bad(s, k, "nonnegative integer required");
      slot = read_int<T>(s, k, v);
    }
  };
  b.get = [=](const LabConfig& c) -> std::string {
    const T& slot = c.*sec.*member;
    if constexpr (std::is_same_v<T, double>)
      return fmt_double(slot);
    else if constexpr (std::is_same_v<T, bool>)
      return slot ? "true" : "false";
    else if constexpr (std::is_same_v<T, std::string>)
      return slot;
    else if constexpr (std::is_same_v<T, std::vector<double>>) {
      std::string out;
      for (std::size_t i = 0; i < slot.size(); ++i) out += (i ? ", " : "") + fmt_double(slot[i]);
      return out;
    } else
      return std::to_string(slot);
  };
  return b;
}

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    using C = LabConfig;
    std::vector<Binding> t;
    t.push_back(bind("kernel", "type", &C::kernel, &KernelSection::type));
    t.push_back(bind("kernel", "c0", &C::kernel, &KernelSection::c0));
    t.push_back(bind("kernel", "alpha", &C::kernel, &KernelSection::alpha));
    t.push_back(bind("kernel", "h", &C::kernel, &KernelSection::h));
    t.push_back(bind("kernel", "cutoff", &C::kernel, &KernelSection::cutoff));
    t.push_back(bind("kernel", "nodes", &C::kernel, &KernelSection::nodes));
    t.push_back(bind("kernel", "xi_min", &C::kernel, &KernelSection::xi_min));
    t.push_back(bind("kernel", "xi_max", &C::kernel, &KernelSection::xi_max));

    t.push_back(bind("levy_measure", "type", &C::levy_measure, &LevyMeasureSection::type));
    t.push_back(bind("levy_measure", "zeta", &C::levy_measure, &LevyMeasureSection::zeta));
    t.push_back(bind("levy_measure", "varpi", &C::levy_measure, &LevyMeasureSection::varpi));
    t.push_back(bind("levy_measure", "z", &C::levy_measure, &LevyMeasureSection::z));
    t.push_back(bind("levy_measure", "quadrature_nodes", &C::levy_measure, &LevyMeasureSection::quadrature_nodes));

    t.push_back(bind("model", "sigma", &C::model, &ModelSection::sigma));
    t.push_back(bind("model", "b", &C::model, &ModelSection::b));
    t.push_back(bind("model", "lambda_bar", &C::model, &ModelSection::lambda_bar));
    t.push_back(bind("model", "delta_theta", &C::model, &ModelSection::delta_theta));
    t.push_back(bind("model", "delta_t", &C::model, &ModelSection::delta_t));
    t.push_back(bind("model", "theta_max_rule", &C::model, &ModelSection::theta_max_rule));
    t.push_back(bind("model", "jump_sign_convention", &C::model, &ModelSection::jump_sign_convention));
    t.push_back(bind("model", "density_scheme", &C::model, &ModelSection::density_scheme));
    t.push_back(bind("model", "clamp_lambda_at_zero", &C::model, &ModelSection::clamp_lambda_at_zero));
    t.push_back(bind("model", "drift_evaluation", &C::model, &ModelSection::drift_evaluation));

    t.push_back(bind("rates", "mode", &C::rates, &RatesSection::mode));
    t.push_back(bind("rates", "r", &C::rates, &RatesSection::r));
    t.push_back(bind("rates", "kappa", &C::rates, &RatesSection::kappa));
    t.push_back(bind("rates", "delta", &C::rates, &RatesSection::delta));
    t.push_back(bind("rates", "r0", &C::rates, &RatesSection::r0));
    t.push_back(bind("rates", "rho0", &C::rates, &RatesSection::rho0));
    t.push_back(bind("rates", "phi", &C::rates, &RatesSection::phi));
    t.push_back(bind("rates", "vasicek_formula", &C::rates, &RatesSection::vasicek_formula));
    t.push_back(bind("rates", "rates_correlated", &C::rates, &RatesSection::rates_correlated));

    t.push_back(bind("pide", "nx", &C::pide, &PideSection::nx));
    t.push_back(bind("pide", "ny", &C::pide, &PideSection::ny));
    t.push_back(bind("pide", "x_range", &C::pide, &PideSection::x_range));
    t.push_back(bind("pide", "y_range", &C::pide, &PideSection::y_range));
    t.push_back(bind("pide", "n_steps", &C::pide, &PideSection::n_steps));
    t.push_back(bind("pide", "ridge_eps", &C::pide, &PideSection::ridge_eps));
    t.push_back(bind("pide", "picard_mode", &C::pide, &PideSection::picard_mode));
    t.push_back(bind("pide", "time_theta", &C::pide, &PideSection::time_theta));
    t.push_back(bind("pide", "delta_hat_sign", &C::pide, &PideSection::delta_hat_sign));
    t.push_back(bind("pide", "jump_compensator", &C::pide, &PideSection::jump_compensator));
    t.push_back(bind("pide", "theta_nodes", &C::pide, &PideSection::theta_nodes));
    t.push_back(bind("pide", "theta", &C::pide, &PideSection::theta));

    t.push_back(bind("pricing", "regime", &C::pricing, &PricingSection::regime));
    t.push_back(bind("pricing", "recovery_type", &C::pricing, &PricingSection::recovery_type));
    t.push_back(bind("pricing", "R", &C::pricing, &PricingSection::R));
    t.push_back(bind("pricing", "w0", &C::pricing, &PricingSection::w0));
    t.push_back(bind("pricing", "w1", &C::pricing, &PricingSection::w1));
    t.push_back(bind("pricing", "f", &C::pricing, &PricingSection::f));

    t.push_back(bind("experiment", "t", &C::experiment, &ExperimentSection::t));
    t.push_back(bind("experiment", "T", &C::experiment, &ExperimentSection::T));
    t.push_back(bind("experiment", "n_paths", &C::experiment, &ExperimentSection::n_paths));
    t.push_back(bind("experiment", "seed", &C::experiment, &ExperimentSection::seed));
    t.push_back(bind("experiment", "workers", &C::experiment, &ExperimentSection::workers));
    t.push_back(bind("experiment", "evaluator", &C::experiment, &ExperimentSection::evaluator));
    t.push_back(bind("experiment", "tail", &C::experiment, &ExperimentSection::tail));
    t.push_back(bind("experiment", "sweep_axis", &C::experiment, &ExperimentSection::sweep_axis));
    t.push_back(bind("experiment", "sweep_values", &C::experiment, &ExperimentSection::sweep_values));
    t.push_back(bind("experiment", "kde_points", &C::experiment, &ExperimentSection::kde_points));
    t.push_back(bind("experiment", "path", &C::experiment, &ExperimentSection::path));
    return t;
  }();
  return table;
}

void one_of(const std::string& section, const std::string& key, const std::string& v,
            std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (v == a) return;
    list += (list.empty() ? "" : ", ") + std::string(a);
  }
  bad(section, key, "expected one of " + list + ", got '" + v + "'");
}

void positive(const char* s, const char* k, double v) {
  if (!(v > 0.0)) bad(s, k, "positive real required");
}
void nonnegative(const char* s, const char* k, double v) {
  if (!(v >= 0.0)) bad(s, k, "nonnegative real required");
}

} // namespace

void LabConfig::validate() const {
  one_of("kernel", "type", kernel.type, {"dirac", "riesz", "fractional"});
  positive("kernel", "c0", kernel.c0);
  if (!(kernel.alpha > 0.0 && kernel.alpha < 1.0)) bad("kernel", "alpha", "value in (0,1) required");
  if (!(kernel.h > 0.5 && kernel.h < 1.0)) bad("kernel", "h", "value in (1/2,1) required");
  nonnegative("kernel", "cutoff", kernel.cutoff);
  if (kernel.nodes < 1) bad("kernel", "nodes", "positive integer required");
  if (!(kernel.xi_max > kernel.xi_min)) bad("kernel", "xi_max", "value > xi_min required");

  one_of("levy_measure", "type", levy_measure.type, {"exponential", "point_mass", "none"});
  positive("levy_measure", "zeta", levy_measure.zeta);
  nonnegative("levy_measure", "varpi", levy_measure.varpi);
  positive("levy_measure", "z", levy_measure.z);
  if (levy_measure.quadrature_nodes < 1) bad("levy_measure", "quadrature_nodes", "positive integer required");

  nonnegative("model", "sigma", model.sigma);
  nonnegative("model", "b", model.b);
  positive("model", "lambda_bar", model.lambda_bar);
  positive("model", "delta_theta", model.delta_theta);
  positive("model", "delta_t", model.delta_t);
  try {
    positive("model", "theta_max_rule", resolve_theta_max(model.theta_max_rule, model.lambda_bar));
  } catch (const std::invalid_argument& e) {
    if (std::string(e.what()).rfind("[model]", 0) == 0) throw;
    bad("model", "theta_max_rule", "expected K/lambda or a positive number, got '" + model.theta_max_rule + "'");
  }
  one_of("model", "jump_sign_convention", model.jump_sign_convention, {"section7", "section3"});
  one_of("model", "density_scheme", model.density_scheme, {"exponential", "euler"});
  one_of("model", "drift_evaluation", model.drift_evaluation, {"auto", "quadrature"});

  one_of("rates", "mode", rates.mode, {"constant", "vasicek", "vasicek_jumps"});
  positive("rates", "kappa", rates.kappa);
  positive("rates", "delta", rates.delta);
  one_of("rates", "vasicek_formula", rates.vasicek_formula, {"standard", "paper_exact"});

  if (pide.nx < 16) bad("pide", "nx", "integer >= 16 required");
  if (pide.ny < 16) bad("pide", "ny", "integer >= 16 required");
  if (pide.x_range.size() != 2 || !(pide.x_range[1] > pide.x_range[0]))
    bad("pide", "x_range", "two values lo, hi with lo < hi required");
  if (pide.y_range.size() != 2 || !(pide.y_range[1] > pide.y_range[0]))
    bad("pide", "y_range", "two values lo, hi with lo < hi required");
  if (pide.n_steps < 1) bad("pide", "n_steps", "positive integer required");
  nonnegative("pide", "ridge_eps", pide.ridge_eps);
  if (!(pide.time_theta >= 0.5 && pide.time_theta <= 1.0)) bad("pide", "time_theta", "value in [0.5,1] required");
  one_of("pide", "delta_hat_sign", pide.delta_hat_sign, {"derived", "as_printed"});
  one_of("pide", "jump_compensator", pide.jump_compensator, {"as_printed", "measure_changed"});
  if (pide.theta_nodes < 2) bad("pide", "theta_nodes", "integer >= 2 required");
  positive("pide", "theta", pide.theta);

  one_of("pricing", "regime", pricing.regime, {"independent", "correlated"});
  one_of("pricing", "recovery_type", pricing.recovery_type, {"constant", "intensity_linked"});
  one_of("pricing", "f", pricing.f, {"identity", "none"});
  if (!(pricing.R >= 0.0 && pricing.R <= 1.0)) bad("pricing", "R", "value in [0,1] required");
  nonnegative("pricing", "w0", pricing.w0);
  nonnegative("pricing", "w1", pricing.w1);
  if (pricing.recovery_type == "intensity_linked") build_recovery(*this);
  if (rates.rates_correlated && rates.mode == "constant")
    bad("rates", "rates_correlated", "needs mode = vasicek or vasicek_jumps");
  if (rates.rates_correlated != (pricing.regime == "correlated"))
    bad("rates", "rates_correlated", "must be true exactly when [pricing] regime = correlated");

  nonnegative("experiment", "t", experiment.t);
  if (!(experiment.T >= experiment.t)) bad("experiment", "T", "value >= t required");
  if (experiment.n_paths < 1) bad("experiment", "n_paths", "positive integer required");
  if (experiment.workers < 1) bad("experiment", "workers", "positive integer required");
  one_of("experiment", "evaluator", experiment.evaluator, {"auto", "aggregated", "stepwise"});
  if (!experiment.sweep_axis.empty()) {
    one_of("experiment", "sweep_axis", experiment.sweep_axis, {"varpi", "lambda", "t", "T"});
    if (experiment.sweep_values.empty()) bad("experiment", "sweep_values", "nonempty list required with sweep_axis");
    if (!std::is_sorted(experiment.sweep_values.begin(), experiment.sweep_values.end()))
      bad("experiment", "sweep_values", "sorted list required");
  }
  if (experiment.kde_points < 2) bad("experiment", "kde_points", "integer >= 2 required");
  if (experiment.evaluator == "aggregated" && model.density_scheme != "exponential")
    bad("experiment", "evaluator", "aggregated requires density_scheme = exponential");
}

LabConfig parse_config_text(const std::string& text) {
  LabConfig c;
  std::set<std::string> sections;
  for (const auto& b : bindings()) sections.insert(b.section);
  std::set<std::pair<std::string, std::string>> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw std::invalid_argument("[" + section + "]: unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw std::invalid_argument(key + ": key outside of any section");
    const auto& table = bindings();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Binding& b) { return b.section == section && b.key == key; });
    if (it == table.end()) bad(section, key, "unknown key");
    if (!seen.insert({section, key}).second) bad(section, key, "duplicate key");
    it->set(c, value);
  }
  c.validate();
  return c;
}

LabConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const LabConfig& config) {
  std::string out, section;
  for (const auto& b : bindings()) {
    if (b.section != section) {
      out += (section.empty() ? "[" : "\n[") + b.section + "]\n";
      section = b.section;
    }
    out += b.key + " = " + b.get(config) + "\n";
  }
  return out;
}

std::uint64_t resolve_seed(std::uint64_t config_seed, const char* env_value, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (env_value) {
    const std::string v = trim(env_value);
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
      throw std::invalid_argument("LAB_SEED: nonnegative integer required, got '" + std::string(env_value) + "'");
    return out;
  }
  return config_seed;
}

std::string config_hash(const LabConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------

CorrelationKernel build_kernel(const LabConfig& c) {
  if (c.kernel.type == "dirac") return CorrelationKernel::dirac(c.kernel.c0, 0);
  if (c.kernel.type == "riesz") return CorrelationKernel(RieszKernel{c.kernel.alpha, c.kernel.cutoff}, 1);
  return CorrelationKernel(FractionalKernel{c.kernel.h, c.kernel.cutoff}, 1);
}

FieldIncrementPlan build_field_plan(const LabConfig& c, double time_step) {
  if (c.kernel.type == "dirac") return FieldIncrementPlan::white_noise(time_step, c.kernel.c0);
  const int n = c.kernel.nodes;
  const double width = c.kernel.xi_max - c.kernel.xi_min;
  std::vector<double> nodes(n), weights(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = n == 1 ? c.kernel.xi_min + 0.5 * width : c.kernel.xi_min + width * i / (n - 1);
    weights[i] = n == 1 ? width : width / (n - 1) * ((i == 0 || i == n - 1) ? 0.5 : 1.0);
  }
  return FieldIncrementPlan::build(build_kernel(c), nodes, weights, time_step);
}

LevyMeasure build_levy_measure(const LabConfig& c) {
  const auto& m = c.levy_measure;
  if (m.type == "none") return LevyMeasure::none();
  if (m.type == "point_mass") return LevyMeasure(PointMass{m.z}, m.quadrature_nodes);
  return LevyMeasure(ExponentialDensity{m.zeta, m.varpi}, m.quadrature_nodes);
}

Section7Dynamics build_dynamics(const LabConfig& c) {
  if (c.levy_measure.type == "point_mass")
    throw std::invalid_argument("[levy_measure] type: density simulation needs exponential or none");
  const bool none = c.levy_measure.type == "none";
  return Section7Dynamics(c.model.sigma, c.model.b, none ? 0.0 : c.levy_measure.zeta,
                          none ? 0.0 : c.levy_measure.varpi,
                          c.model.jump_sign_convention == "section7" ? JumpSign::Section7 : JumpSign::Section3,
                          c.model.density_scheme == "euler" ? DensityScheme::Euler : DensityScheme::Exponential,
                          c.levy_measure.quadrature_nodes);
}

VasicekSpec build_rates(const LabConfig& c) {
  VasicekSpec s = VasicekSpec::constant_loading(c.rates.kappa, c.rates.delta, c.rates.r0, c.rates.rho0);
  const double phi = c.rates.mode == "vasicek_jumps" ? c.rates.phi : 0.0;
  s.phi = [phi](double, double) { return phi; };
  return s;
}

KernelModel build_kernel_model(const LabConfig& c) {
  KernelModel m;
  const double sigma = c.model.sigma, b = c.model.b, lambda_bar = c.model.lambda_bar;
  m.intensity = CoefficientSpec::section7(sigma, b, lambda_bar);
  m.rates = build_rates(c);
  const double span = std::max(c.experiment.T - c.experiment.t, 1e-12);
  m.field = build_field_plan(c, span / c.pide.n_steps);
  m.measure = build_levy_measure(c);
  m.options.delta_hat_sign = parse_delta_hat_sign(c.pide.delta_hat_sign);
  m.options.jump_compensator = parse_jump_compensator(c.pide.jump_compensator);
  m.pide.nx = c.pide.nx;
  m.pide.ny = c.pide.ny;
  m.pide.x_min = c.pide.x_range[0];
  m.pide.x_max = c.pide.x_range[1];
  m.pide.y_min = c.pide.y_range[0];
  m.pide.y_max = c.pide.y_range[1];
  m.pide.n_steps = c.pide.n_steps;
  m.pide.ridge_eps = c.pide.ridge_eps;
  m.pide.picard_mode = c.pide.picard_mode;
  m.pide.time_theta = c.pide.time_theta;
  return m;
}

RecoveryModel build_recovery(const LabConfig& c) {
  if (c.pricing.recovery_type == "constant") return RecoveryModel::constant(c.pricing.R);
  IntensityLinkedRecovery il;
  il.w0 = c.pricing.w0;
  il.w1 = c.pricing.w1;
  if (c.pricing.f == "none") {
    il.f = [](double) { return 0.0; };
    il.f_name = "none";
  }
  return RecoveryModel(il);
}

ExperimentConfig build_experiment(const LabConfig& c) {
  ExperimentConfig e;
  e.t = c.experiment.t;
  e.T = c.experiment.T;
  e.r = c.rates.r;
  e.R = c.pricing.R;
  e.b = c.model.b;
  const bool none = c.levy_measure.type == "none";
  e.zeta = none ? 0.0 : c.levy_measure.zeta;
  e.varpi = none ? 0.0 : c.levy_measure.varpi;
  e.lambda_bar = c.model.lambda_bar;
  e.sigma = c.model.sigma;
  e.n_paths = c.experiment.n_paths;
  e.delta = c.model.delta_theta;
  e.delta_t = c.model.delta_t;
  e.theta_max_rule = c.model.theta_max_rule;
  e.seed = c.experiment.seed;
  e.workers = c.experiment.workers;
  e.jump_sign = c.model.jump_sign_convention == "section7" ? JumpSign::Section7 : JumpSign::Section3;
  e.scheme = c.model.density_scheme == "euler" ? DensityScheme::Euler : DensityScheme::Exponential;
  e.evaluator = c.experiment.evaluator == "aggregated" ? PathEvaluator::Aggregated
                : c.experiment.evaluator == "stepwise" ? PathEvaluator::Stepwise
                                                       : PathEvaluator::Auto;
  e.tail = c.experiment.tail;
  e.quadrature_nodes = c.levy_measure.quadrature_nodes;
  if (c.levy_measure.type == "point_mass")
    throw std::invalid_argument("[levy_measure] type: experiments need exponential or none");
  return e;
}

// ---------------------------------------------------------------------------

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["version"] = version;
  j["command"] = command;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["outputs"] = outputs;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
  out << to_json();
}

bool VerifyReport::all_passed() const {
  return std::none_of(entries.begin(), entries.end(), [](const VerifyEntry& e) { return e.status == "fail"; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  for (const auto& e : entries) {
    std::string tag = e.status;
    std::transform(tag.begin(), tag.end(), tag.begin(), ::toupper);
    os << tag << "  " << e.name << "  " << e.detail << "\n";
  }
  return os.str();
}

std::string VerifyReport::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : entries) j.push_back({{"name", e.name}, {"status", e.status}, {"detail", e.detail}});
  return j.dump(2) + "\n";
}

VerifyReport run_verify(const LabConfig& config) {
  VerifyReport report;
  auto record = [&](std::string name, std::string status, std::string detail) {
    report.entries.push_back({std::move(name), std::move(status), std::move(detail)});
  };
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      record(name, "fail", std::string("error: ") + e.what());
    }
  };
  std::ostringstream os;

  guarded("deterministic_baseline", [&] {
    ExperimentConfig e = build_experiment(config);
    e.sigma = 0.0;
    e.b = 0.0;
    e.n_paths = std::min<std::size_t>(e.n_paths, 64);
    const double expected = deterministic_flat_price(e.t, e.T, e.r, e.R, e.lambda_bar);
    const PriceDistribution d = run_price_distribution(e);
    double worst = 0.0;
    for (double p : d.prices) worst = std::max(worst, std::abs(p - expected));
    std::ostringstream m;
    m << std::setprecision(10) << "expected " << expected << ", max |error| " << worst << " over " << d.prices.size()
      << " paths (tol 1e-6)";
    record("deterministic_baseline", worst <= 1e-6 && d.rejected == 0 ? "pass" : "fail", m.str());
  });

  guarded("vasicek_formula", [&] {
    const VasicekSpec spec = build_rates(config);
    const FieldIncrementPlan plan = build_field_plan(config, 1.0 / 200.0);
    const double horizon = 5.0;
    const VasicekAdjudication a = adjudicate_vasicek_formula(spec, plan, horizon, 20000, config.experiment.seed);
    const bool paper = config.rates.vasicek_formula == "paper_exact";
    const bool ok = paper ? a.paper_exact_within : a.standard_within;
    std::string status = ok ? "pass" : (paper ? "warn" : "fail");
    record("vasicek_formula", status, "configured " + config.rates.vasicek_formula + "; " + a.summary());
  });

  guarded("density_martingale", [&] {
    const ExperimentConfig e = build_experiment(config);
    const double theta_max = resolve_theta_max(e.theta_max_rule, e.lambda_bar);
    std::vector<double> thetas;
    for (double th : {0.6, 1.0, 5.0})
      if (th <= theta_max) thetas.push_back(th);
    const auto cells = density_martingale_check(e, thetas);
    bool ok = true;
    std::ostringstream m;
    m << std::setprecision(6);
    for (const auto& c : cells) {
      ok = ok && c.within(3.0);
      m << "theta=" << c.theta << " mean=" << c.mean << " alpha0=" << c.initial << " se=" << c.se << "; ";
    }
    record("density_martingale", ok ? "pass" : "fail", m.str());
  });

  guarded("config_round_trip", [&] {
    const bool ok = parse_config_text(serialize_config(config)) == config;
    record("config_round_trip", ok ? "pass" : "fail", "hash " + config_hash(config));
  });
  return report;
}

} // namespace lrf
