#include "riskbound/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "riskbound/bounds.hpp"
#include "riskbound/csv.hpp"
#include "riskbound/errors.hpp"
#include "riskbound/integrate.hpp"
#include "riskbound/matrix_bounds.hpp"
#include "riskbound/model.hpp"
#include "riskbound/numeric.hpp"
#include "riskbound/optimize.hpp"
#include "riskbound/testfn.hpp"

namespace riskbound::cli {

namespace {

using nlohmann::json;

constexpr double kMasterSlack = 1e-7;
constexpr double kEqualityTol = 1e-7;
constexpr double kShortcutTol = 1e-8;
constexpr double kDominanceSlack = 1e-9;
constexpr double kEstimatorSlack = 1e-8;
constexpr double kLoewnerTol = 1e-7;
constexpr double kSymmetryTol = 1e-12;

const std::vector<double> kBatteryH = {0.25, 0.5, 1.0, 1.5, 2.0};
const std::vector<double> kBatteryS = {0.1, 0.3, 0.5, 0.7, 0.9};
const std::vector<double> kLimitH = {0.5, 0.25, 0.1, 0.05, 0.01};

struct Args {
  std::string subcommand;
  std::string config_path;
  std::optional<std::string> out_path;
};

Args parse_args(const std::vector<std::string>& args) {
  static const char* kUsage =
      "usage: riskbound <risk|bound|sweep|optimize|verify|compare> "
      "--config PATH [--out PATH]";
  if (args.empty()) throw ConfigError("", kUsage);
  Args out;
  out.subcommand = args[0];
  const bool known = out.subcommand == "risk" || out.subcommand == "bound" ||
                     out.subcommand == "sweep" ||
                     out.subcommand == "optimize" ||
                     out.subcommand == "verify" || out.subcommand == "compare";
  if (!known) {
    throw ConfigError("", "unknown subcommand '" + out.subcommand + "'; " +
                              kUsage);
  }
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      out.config_path = args[++i];
    } else if (args[i] == "--out" && i + 1 < args.size()) {
      out.out_path = args[++i];
    } else {
      throw ConfigError("", "unexpected argument '" + args[i] + "'; " +
                                kUsage);
    }
  }
  if (out.config_path.empty()) {
    throw ConfigError("", std::string("--config is required; ") + kUsage);
  }
  return out;
}

std::string dotted(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) {
    throw ConfigError(path, path + ": expected an object");
  }
}

void reject_unknown(const json& obj, const std::string& path,
                    const std::vector<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) ==
        allowed.end()) {
      const std::string key = dotted(path, item.key());
      throw ConfigError(key, key + ": unknown key");
    }
  }
}

const json* find_key(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, path + ": expected a number");
  return j.get<double>();
}

long long as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    throw ConfigError(path, path + ": expected an integer");
  }
  return j.get<long long>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, path + ": expected a string");
  return j.get<std::string>();
}

double req_number(const json& obj, const std::string& prefix,
                  const std::string& key) {
  const json* j = find_key(obj, key);
  const std::string path = dotted(prefix, key);
  if (!j) throw ConfigError(path, path + ": required key is missing");
  return as_number(*j, path);
}

std::vector<double> req_number_array(const json& obj, const std::string& prefix,
                                     const std::string& key) {
  const json* j = find_key(obj, key);
  const std::string path = dotted(prefix, key);
  if (!j) throw ConfigError(path, path + ": required key is missing");
  if (!j->is_array() || j->empty()) {
    throw ConfigError(path, path + ": expected a nonempty array of numbers");
  }
  std::vector<double> out;
  for (const json& v : *j) out.push_back(as_number(v, path));
  return out;
}

Mat req_matrix(const json& obj, const std::string& prefix,
               const std::string& key) {
  const json* j = find_key(obj, key);
  const std::string path = dotted(prefix, key);
  if (!j) throw ConfigError(path, path + ": required key is missing");
  if (!j->is_array() || j->empty()) {
    throw ConfigError(path, path + ": expected a nonempty array of rows");
  }
  std::size_t cols = 0;
  std::vector<std::vector<double>> rows;
  for (const json& r : *j) {
    if (!r.is_array() || r.empty()) {
      throw ConfigError(path, path + ": expected rows of numbers");
    }
    std::vector<double> row;
    for (const json& v : r) row.push_back(as_number(v, path));
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      throw ConfigError(path, path + ": rows must have equal length");
    }
    rows.push_back(std::move(row));
  }
  Mat out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < cols; ++k) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          rows[i][k];
    }
  }
  return out;
}

struct CliModel {
  std::optional<ScalarModel> scalar;
  std::optional<VectorModel> vector;
};

CliModel parse_model(const json& cfg, const std::string& subcommand) {
  const json* j = find_key(cfg, "model");
  if (!j) throw ConfigError("model", "model: required key is missing");
  require_object(*j, "model");
  const json* kind_j = find_key(*j, "kind");
  if (!kind_j) {
    throw ConfigError("model.kind", "model.kind: required key is missing");
  }
  const std::string kind = as_string(*kind_j, "model.kind");

  CliModel out;
  if (kind == "gaussian_gaussian") {
    reject_unknown(*j, "model", {"kind", "var_prior", "var_noise", "n_obs"});
    GaussianGaussianSpec spec;
    spec.var_prior = req_number(*j, "model", "var_prior");
    spec.var_noise = req_number(*j, "model", "var_noise");
    const json* n = find_key(*j, "n_obs");
    if (!n) {
      throw ConfigError("model.n_obs", "model.n_obs: required key is missing");
    }
    const long long n_obs = as_integer(*n, "model.n_obs");
    if (!(spec.var_prior > 0.0) || !std::isfinite(spec.var_prior)) {
      throw ConfigError("model.var_prior",
                        "model.var_prior: must be finite and > 0");
    }
    if (!(spec.var_noise > 0.0) || !std::isfinite(spec.var_noise)) {
      throw ConfigError("model.var_noise",
                        "model.var_noise: must be finite and > 0");
    }
    if (n_obs < 1 || n_obs > 1000000) {
      throw ConfigError("model.n_obs", "model.n_obs: must be in [1, 1000000]");
    }
    spec.n_obs = static_cast<int>(n_obs);
    out.scalar = make_model(spec);
    return out;
  }
  if (kind == "discrete_channel") {
    reject_unknown(*j, "model", {"kind", "flip_prob"});
    DiscreteChannelSpec spec;
    spec.flip_prob = req_number(*j, "model", "flip_prob");
    if (!(spec.flip_prob > 0.0) || !(spec.flip_prob < 0.5)) {
      throw ConfigError("model.flip_prob",
                        "model.flip_prob: must lie in (0, 0.5)");
    }
    out.scalar = make_model(spec);
    return out;
  }
  if (kind == "uniform_location") {
    reject_unknown(*j, "model", {"kind", "prior_var", "width"});
    UniformLocationSpec spec;
    spec.prior_var = req_number(*j, "model", "prior_var");
    spec.width = req_number(*j, "model", "width");
    if (!(spec.prior_var > 0.0) || !std::isfinite(spec.prior_var)) {
      throw ConfigError("model.prior_var",
                        "model.prior_var: must be finite and > 0");
    }
    if (!(spec.width > 0.0) || !std::isfinite(spec.width)) {
      throw ConfigError("model.width", "model.width: must be finite and > 0");
    }
    out.scalar = make_model(spec);
    return out;
  }
  if (kind == "linear_gaussian_vector") {
    if (subcommand != "verify") {
      throw ConfigError("model.kind",
                        "model.kind: linear_gaussian_vector is only "
                        "supported by the verify subcommand");
    }
    reject_unknown(*j, "model", {"kind", "H", "prior_cov", "noise_cov"});
    const Mat h = req_matrix(*j, "model", "H");
    const Mat prior_cov = req_matrix(*j, "model", "prior_cov");
    const Mat noise_cov = req_matrix(*j, "model", "noise_cov");
    try {
      out.vector = make_linear_gaussian_vector_model(h, prior_cov, noise_cov);
    } catch (const NotSPD& e) {
      throw ConfigError("model", std::string("model: ") + e.what());
    } catch (const InvalidSpec& e) {
      throw ConfigError("model", std::string("model: ") + e.what());
    }
    return out;
  }
  throw ConfigError("model.kind",
                    "model.kind: unknown model kind '" + kind + "'");
}

IntegrationConfig parse_integration(const json& cfg) {
  IntegrationConfig out;
  const json* j = find_key(cfg, "integration");
  if (!j) return out;
  require_object(*j, "integration");
  reject_unknown(*j, "integration",
                 {"nodes_per_axis", "tail_sigmas", "mc_samples", "seed",
                  "workers"});
  if (const json* v = find_key(*j, "nodes_per_axis")) {
    const long long n = as_integer(*v, "integration.nodes_per_axis");
    if (n < 33 || n > 100000) {
      throw ConfigError("integration.nodes_per_axis",
                        "integration.nodes_per_axis: must be in [33, 100000]");
    }
    out.nodes_per_axis = static_cast<int>(n);
  }
  if (const json* v = find_key(*j, "tail_sigmas")) {
    const double t = as_number(*v, "integration.tail_sigmas");
    if (!(t >= 4.0) || !std::isfinite(t)) {
      throw ConfigError("integration.tail_sigmas",
                        "integration.tail_sigmas: must be finite and >= 4");
    }
    out.tail_sigmas = t;
  }
  if (const json* v = find_key(*j, "mc_samples")) {
    const long long n = as_integer(*v, "integration.mc_samples");
    if (n < 0) {
      throw ConfigError("integration.mc_samples",
                        "integration.mc_samples: must be >= 0");
    }
    out.mc_samples = n;
  }
  if (const json* v = find_key(*j, "seed")) {
    if (!v->is_number_unsigned() && !v->is_number_integer()) {
      throw ConfigError("integration.seed",
                        "integration.seed: expected an integer");
    }
    const long long s = v->get<long long>();
    if (s < 0) {
      throw ConfigError("integration.seed",
                        "integration.seed: must be >= 0");
    }
    out.seed = static_cast<std::uint64_t>(s);
  }
  if (const json* v = find_key(*j, "workers")) {
    const long long w = as_integer(*v, "integration.workers");
    if (w < 1 || w > 256) {
      throw ConfigError("integration.workers",
                        "integration.workers: must be in [1, 256]");
    }
    out.workers = static_cast<int>(w);
  }
  return out;
}

struct OutputCfg {
  std::optional<std::string> csv_path;
  int precision = 10;
};

OutputCfg parse_output(const json& cfg) {
  OutputCfg out;
  const json* j = find_key(cfg, "output");
  if (!j) return out;
  require_object(*j, "output");
  reject_unknown(*j, "output", {"csv_path", "precision"});
  if (const json* v = find_key(*j, "csv_path")) {
    out.csv_path = as_string(*v, "output.csv_path");
  }
  if (const json* v = find_key(*j, "precision")) {
    const long long p = as_integer(*v, "output.precision");
    if (p < 1 || p > 17) {
      throw ConfigError("output.precision",
                        "output.precision: must be in [1, 17]");
    }
    out.precision = static_cast<int>(p);
  }
  return out;
}

struct BoundCfg {
  BoundFlavor flavor = BoundFlavor::global;
  std::optional<PsiFamily> family;
  std::optional<double> h;
  std::optional<double> s;
  std::optional<double> y;
};

double bound_number(const json& obj, const char* key) {
  return req_number(obj, "bound", key);
}

void check_s_range(double s) {
  if (!(s > 0.0) || s > 1.0) {
    throw ConfigError("bound.s", "bound.s: must lie in (0, 1]");
  }
}

void check_h_value(double h) {
  if (!std::isfinite(h) || h == 0.0) {
    throw ConfigError("bound.h", "bound.h: must be finite and nonzero");
  }
}

// Parses the bound section for the `bound` subcommand, where the allowed
// keys depend on the flavor.
BoundCfg parse_bound_full(const json& cfg) {
  const json* j = find_key(cfg, "bound");
  if (!j) throw ConfigError("bound", "bound: required key is missing");
  require_object(*j, "bound");
  const json* flavor_j = find_key(*j, "flavor");
  if (!flavor_j) {
    throw ConfigError("bound.flavor", "bound.flavor: required key is missing");
  }
  BoundCfg out;
  const std::string flavor_text = as_string(*flavor_j, "bound.flavor");
  try {
    out.flavor = bound_flavor_from_string(flavor_text);
  } catch (const InvalidSpec&) {
    throw ConfigError("bound.flavor", "bound.flavor: unknown flavor '" +
                                          flavor_text + "'");
  }

  const bool takes_y = out.flavor == BoundFlavor::conditional ||
                       out.flavor == BoundFlavor::ww_conditional;
  switch (out.flavor) {
    case BoundFlavor::global:
    case BoundFlavor::conditional:
    case BoundFlavor::avg_conditional:
    case BoundFlavor::avg_theta: {
      std::vector<std::string> allowed = {"flavor", "family"};
      const json* fam_j = find_key(*j, "family");
      if (!fam_j) {
        throw ConfigError("bound.family",
                          "bound.family: required key is missing");
      }
      const std::string fam = as_string(*fam_j, "bound.family");
      if (fam == "ww") {
        out.family = PsiFamily::ww;
      } else if (fam == "cond") {
        out.family = PsiFamily::cond;
      } else if (fam == "optimal") {
        out.family = PsiFamily::optimal;
      } else {
        throw ConfigError("bound.family",
                          "bound.family: must be ww, cond, or optimal");
      }
      if (*out.family != PsiFamily::optimal) {
        allowed.push_back("h");
        allowed.push_back("s");
      }
      if (takes_y) allowed.push_back("y");
      reject_unknown(*j, "bound", allowed);
      if (*out.family != PsiFamily::optimal) {
        out.h = bound_number(*j, "h");
        out.s = bound_number(*j, "s");
        check_h_value(*out.h);
        check_s_range(*out.s);
      }
      if (takes_y) out.y = bound_number(*j, "y");
      return out;
    }
    case BoundFlavor::ww:
    case BoundFlavor::ww_conditional: {
      std::vector<std::string> allowed = {"flavor", "h", "s"};
      if (takes_y) allowed.push_back("y");
      reject_unknown(*j, "bound", allowed);
      out.h = bound_number(*j, "h");
      out.s = bound_number(*j, "s");
      check_h_value(*out.h);
      check_s_range(*out.s);
      if (takes_y) out.y = bound_number(*j, "y");
      return out;
    }
    case BoundFlavor::asymptotic:
    case BoundFlavor::exact_risk:
      reject_unknown(*j, "bound", {"flavor"});
      return out;
  }
  throw ConfigError("bound.flavor", "bound.flavor: unknown flavor");
}

// Parses the bound section for sweep/optimize: family and flavor only.
BoundCfg parse_bound_family_flavor(const json& cfg) {
  const json* j = find_key(cfg, "bound");
  if (!j) throw ConfigError("bound", "bound: required key is missing");
  require_object(*j, "bound");
  reject_unknown(*j, "bound", {"flavor", "family"});
  const json* flavor_j = find_key(*j, "flavor");
  if (!flavor_j) {
    throw ConfigError("bound.flavor", "bound.flavor: required key is missing");
  }
  const json* fam_j = find_key(*j, "family");
  if (!fam_j) {
    throw ConfigError("bound.family", "bound.family: required key is missing");
  }
  BoundCfg out;
  const std::string flavor_text = as_string(*flavor_j, "bound.flavor");
  try {
    out.flavor = bound_flavor_from_string(flavor_text);
  } catch (const InvalidSpec&) {
    throw ConfigError("bound.flavor", "bound.flavor: unknown flavor '" +
                                          flavor_text + "'");
  }
  const std::string fam = as_string(*fam_j, "bound.family");
  if (fam == "ww") {
    out.family = PsiFamily::ww;
  } else if (fam == "cond") {
    out.family = PsiFamily::cond;
  } else {
    throw ConfigError("bound.family", "bound.family: must be ww or cond");
  }
  const bool ok_flavor = out.flavor == BoundFlavor::global ||
                         out.flavor == BoundFlavor::avg_conditional ||
                         out.flavor == BoundFlavor::avg_theta ||
                         out.flavor == BoundFlavor::ww;
  if (!ok_flavor) {
    throw ConfigError("bound.flavor",
                      "bound.flavor: must be global, avg_conditional, "
                      "avg_theta, or ww");
  }
  if (out.flavor == BoundFlavor::ww && *out.family != PsiFamily::ww) {
    throw ConfigError("bound.flavor",
                      "bound.flavor: the ww flavor requires family ww");
  }
  return out;
}

Interval parse_range(const json& obj, const std::string& prefix,
                     const std::string& key) {
  const std::vector<double> v = req_number_array(obj, prefix, key);
  const std::string path = dotted(prefix, key);
  if (v.size() != 2 || !(v[0] < v[1])) {
    throw ConfigError(path, path + ": expected [lo, hi] with lo < hi");
  }
  return Interval{v[0], v[1]};
}

void warn_s_one(std::ostream& err) {
  err << "warning: s = 1 puts all weight on one density-ratio term; the "
         "denominator can degenerate\n";
}

const ScalarModel& scalar_model_or_fail(const CliModel& m) {
  if (!m.scalar) {
    throw ConfigError("model.kind",
                      "model.kind: this subcommand needs a scalar model");
  }
  return *m.scalar;
}

void emit(std::ostream& out, const std::optional<std::string>& path,
          const std::string& text) {
  out << text;
  if (path) {
    std::ofstream f(*path, std::ios::binary);
    if (!f) throw NonFinite("cannot open output file '" + *path + "'");
    f << text;
  }
}

int run_risk(const CliModel& model, const IntegrationConfig& cfg,
             const OutputCfg& output, const std::optional<std::string>& out_path,
             std::ostream& out) {
  const ScalarModel& m = scalar_model_or_fail(model);
  const BoundResult r = bayes_risk_exact(m, cfg);
  emit(out, out_path ? out_path : output.csv_path,
       format_sig(*r.value, output.precision) + "\n");
  return 0;
}

int run_bound(const CliModel& model, const BoundCfg& bound,
              const IntegrationConfig& cfg, const OutputCfg& output,
              const std::optional<std::string>& out_path, std::ostream& out,
              std::ostream& err) {
  const ScalarModel& m = scalar_model_or_fail(model);
  const bool ww_like = bound.flavor == BoundFlavor::ww ||
                       bound.flavor == BoundFlavor::ww_conditional ||
                       (bound.family && *bound.family == PsiFamily::ww);
  if (ww_like && bound.s && *bound.s == 1.0) warn_s_one(err);

  BoundResult r;
  switch (bound.flavor) {
    case BoundFlavor::ww:
      r = bound_ww(m, *bound.h, *bound.s, cfg);
      break;
    case BoundFlavor::ww_conditional:
      r = bound_ww_conditional(m, *bound.h, *bound.s, *bound.y, cfg);
      break;
    case BoundFlavor::asymptotic:
      r = bound_asymptotic(m, cfg);
      break;
    case BoundFlavor::exact_risk:
      r = bayes_risk_exact(m, cfg);
      break;
    default: {
      PsiSpec spec;
      spec.family = *bound.family;
      if (bound.h) spec.h = *bound.h;
      if (bound.s) spec.s = *bound.s;
      if (bound.flavor == BoundFlavor::global) {
        r = bound_global(m, spec, cfg);
      } else if (bound.flavor == BoundFlavor::conditional) {
        r = bound_conditional(m, spec, *bound.y, cfg);
      } else if (bound.flavor == BoundFlavor::avg_conditional) {
        r = bound_avg_conditional(m, spec, cfg);
      } else {
        r = bound_avg_theta(m, spec, cfg);
      }
      break;
    }
  }
  std::ostringstream text;
  write_bound_csv(text, r, output.precision);
  emit(out, out_path ? out_path : output.csv_path, text.str());
  return 0;
}

int run_sweep(const CliModel& model, const BoundCfg& bound, const json& cfg_json,
              const IntegrationConfig& cfg, const OutputCfg& output,
              const std::optional<std::string>& out_path, std::ostream& out,
              std::ostream& err) {
  const ScalarModel& m = scalar_model_or_fail(model);
  const json* j = find_key(cfg_json, "sweep");
  if (!j) throw ConfigError("sweep", "sweep: required key is missing");
  require_object(*j, "sweep");
  reject_unknown(*j, "sweep", {"h_grid", "s_grid"});
  const std::vector<double> h_grid = req_number_array(*j, "sweep", "h_grid");
  const std::vector<double> s_grid = req_number_array(*j, "sweep", "s_grid");
  for (double h : h_grid) {
    if (!std::isfinite(h) || h == 0.0) {
      throw ConfigError("sweep.h_grid",
                        "sweep.h_grid: values must be finite and nonzero");
    }
  }
  for (double s : s_grid) {
    if (!(s > 0.0) || s > 1.0) {
      throw ConfigError("sweep.s_grid",
                        "sweep.s_grid: values must lie in (0, 1]");
    }
  }
  if (*bound.family == PsiFamily::ww &&
      std::find(s_grid.begin(), s_grid.end(), 1.0) != s_grid.end()) {
    warn_s_one(err);
  }
  const SweepTable table =
      sweep(m, *bound.family, bound.flavor, h_grid, s_grid, cfg);
  std::ostringstream text;
  write_sweep_csv(text, table, output.precision);
  emit(out, out_path ? out_path : output.csv_path, text.str());
  return 0;
}

int run_optimize(const CliModel& model, const BoundCfg& bound,
                 const json& cfg_json, const IntegrationConfig& cfg,
                 const OutputCfg& output,
                 const std::optional<std::string>& out_path, std::ostream& out,
                 std::ostream& err) {
  const ScalarModel& m = scalar_model_or_fail(model);
  const json* j = find_key(cfg_json, "optimize");
  if (!j) throw ConfigError("optimize", "optimize: required key is missing");
  require_object(*j, "optimize");
  reject_unknown(*j, "optimize", {"h_range", "s_range"});
  const Interval h_range = parse_range(*j, "optimize", "h_range");
  const Interval s_range = parse_range(*j, "optimize", "s_range");
  if (!(s_range.lo > 0.0) || s_range.hi > 1.0) {
    throw ConfigError("optimize.s_range",
                      "optimize.s_range: must lie within (0, 1]");
  }
  if (*bound.family == PsiFamily::ww && s_range.hi == 1.0) warn_s_one(err);
  const Optimum opt =
      maximize(m, *bound.family, bound.flavor, h_range, s_range, cfg);
  std::ostringstream text;
  text << "h_star,s_star,value,evaluations,converged\n"
       << format_sig(opt.h_star, output.precision) << ','
       << format_sig(opt.s_star, output.precision) << ','
       << format_sig(opt.value, output.precision) << ',' << opt.evaluations
       << ',' << (opt.converged ? "true" : "false") << '\n';
  emit(out, out_path ? out_path : output.csv_path, text.str());
  return 0;
}

int run_compare(const CliModel& model, const json& cfg_json,
                const IntegrationConfig& cfg, const OutputCfg& output,
                const std::optional<std::string>& out_path, std::ostream& out,
                std::ostream& err) {
  const ScalarModel& m = scalar_model_or_fail(model);
  const json* j = find_key(cfg_json, "optimize");
  if (!j) throw ConfigError("optimize", "optimize: required key is missing");
  require_object(*j, "optimize");
  reject_unknown(*j, "optimize", {"h_range", "s_range"});
  const Interval h_range = parse_range(*j, "optimize", "h_range");
  const Interval s_range = parse_range(*j, "optimize", "s_range");
  if (!(s_range.lo > 0.0) || s_range.hi > 1.0) {
    throw ConfigError("optimize.s_range",
                      "optimize.s_range: must lie within (0, 1]");
  }
  if (s_range.hi == 1.0) warn_s_one(err);

  const int prec = output.precision;
  const double exact = *bayes_risk_exact(m, cfg).value;
  const Optimum ww_opt =
      maximize(m, PsiFamily::ww, BoundFlavor::ww, h_range, s_range, cfg);
  const Optimum cond_opt = maximize(m, PsiFamily::cond, BoundFlavor::avg_theta,
                                    h_range, s_range, cfg);
  const BoundResult asym = bound_asymptotic(m, cfg);

  std::ostringstream text;
  text << "family,flavor,h,s,value,ratio,status\n";
  text << "ww,ww," << format_sig(ww_opt.h_star, prec) << ','
       << format_sig(ww_opt.s_star, prec) << ','
       << format_sig(ww_opt.value, prec) << ','
       << format_sig(ww_opt.value / exact, prec) << ",ok\n";
  text << "cond,avg_theta," << format_sig(cond_opt.h_star, prec) << ','
       << format_sig(cond_opt.s_star, prec) << ','
       << format_sig(cond_opt.value, prec) << ','
       << format_sig(cond_opt.value / exact, prec) << ",ok\n";
  text << ",exact_risk,,," << format_sig(exact, prec) << ','
       << format_sig(1.0, prec) << ",ok\n";
  text << ",asymptotic,,,";
  if (asym.status == BoundStatus::ok) {
    text << format_sig(*asym.value, prec) << ','
         << format_sig(*asym.value / exact, prec);
  } else {
    text << ',';
  }
  text << ',' << to_string(asym.status) << '\n';
  emit(out, out_path ? out_path : output.csv_path, text.str());
  return 0;
}

// ---------------------------------------------------------------------------
// verify battery

struct CheckList {
  std::vector<std::pair<std::string, bool>> checks;

  void add(const std::string& name, const std::function<bool()>& body) {
    bool pass = false;
    try {
      pass = body();
    } catch (...) {
      pass = false;
    }
    checks.emplace_back(name, pass);
  }
};

bool below(const std::optional<double>& v, double limit) {
  return v && *v <= limit;
}

void scalar_battery(const ScalarModel& m, const IntegrationConfig& cfg,
                    CheckList& list) {
  const BoundResult risk_r = bayes_risk_exact(m, cfg);
  const double risk = risk_r.value ? *risk_r.value : 0.0;
  list.add("exact_risk_finite_positive", [&] {
    return risk_r.status == BoundStatus::ok && std::isfinite(risk) &&
           risk > 0.0;
  });

  list.add("estimator_dominance", [&] {
    const std::vector<Estimator> rules = {
        {[](double) { return 0.0; }, "zero"},
        {[](double y) { return y; }, "identity"},
        {[](double y) { return 0.5 * y; }, "half"},
        {[](double y) { return y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0); },
         "sign"},
    };
    for (const Estimator& est : rules) {
      if (mse_of_estimator(m, est, cfg) < risk - kEstimatorSlack) return false;
    }
    return true;
  });

  const std::vector<PsiFamily> families = {PsiFamily::ww, PsiFamily::cond};
  for (PsiFamily family : families) {
    const std::string fam = to_string(family);
    list.add("master_" + fam + "_global", [&] {
      for (double h : kBatteryH) {
        for (double s : kBatteryS) {
          const BoundResult r = bound_global(m, {family, h, s, {}}, cfg);
          if (r.status == BoundStatus::ok && !below(r.value, risk + kMasterSlack)) {
            return false;
          }
        }
      }
      return true;
    });
    list.add("master_" + fam + "_avg_conditional", [&] {
      for (double h : kBatteryH) {
        for (double s : kBatteryS) {
          const BoundResult r = bound_avg_conditional(m, {family, h, s, {}}, cfg);
          if (r.status == BoundStatus::ok && !below(r.value, risk + kMasterSlack)) {
            return false;
          }
        }
      }
      return true;
    });
    list.add("master_" + fam + "_avg_theta", [&] {
      for (double h : kBatteryH) {
        for (double s : kBatteryS) {
          const BoundResult r = bound_avg_theta(m, {family, h, s, {}}, cfg);
          if (r.status == BoundStatus::ok && !below(r.value, risk + kMasterSlack)) {
            return false;
          }
        }
      }
      return true;
    });
  }

  list.add("master_ww_shortcut", [&] {
    for (double h : kBatteryH) {
      for (double s : kBatteryS) {
        const BoundResult r = bound_ww(m, h, s, cfg);
        if (r.status == BoundStatus::ok && !below(r.value, risk + kMasterSlack)) {
          return false;
        }
      }
    }
    return true;
  });

  list.add("master_optimal", [&] {
    const PsiSpec spec{PsiFamily::optimal, 1.0, 0.5, {}};
    const BoundResult a = bound_global(m, spec, cfg);
    const BoundResult b = bound_avg_conditional(m, spec, cfg);
    const BoundResult c = bound_avg_theta(m, spec, cfg);
    return below(a.value, risk + kMasterSlack) &&
           below(b.value, risk + kMasterSlack) &&
           below(c.value, risk + kMasterSlack);
  });

  list.add("zero_condition_ww", [&] {
    const std::vector<double> probes = default_y_probes(m, cfg);
    for (double h : kBatteryH) {
      for (double s : kBatteryS) {
        const ConditionReport rep =
            check_zero_condition(m, {PsiFamily::ww, h, s, {}}, probes, cfg);
        if (!rep.pass) return false;
      }
    }
    return true;
  });

  list.add("equality_optimal_global", [&] {
    const BoundResult r = bound_global(m, {PsiFamily::optimal, 1.0, 0.5, {}}, cfg);
    return r.value && std::abs(*r.value - risk) <= kEqualityTol;
  });
  list.add("equality_optimal_avg_conditional", [&] {
    const BoundResult r =
        bound_avg_conditional(m, {PsiFamily::optimal, 1.0, 0.5, {}}, cfg);
    return r.value && std::abs(*r.value - risk) <= kEqualityTol;
  });
  list.add("equality_optimal_avg_theta", [&] {
    const BoundResult r =
        bound_avg_theta(m, {PsiFamily::optimal, 1.0, 0.5, {}}, cfg);
    return r.value && std::abs(*r.value - risk) <= kEqualityTol;
  });
  list.add("equality_optimal_conditional", [&] {
    for (double y : default_y_probes(m, cfg)) {
      const BoundResult r =
          bound_conditional(m, {PsiFamily::optimal, 1.0, 0.5, {}}, y, cfg);
      const double pv = posterior_variance(m, y, cfg);
      if (!r.value || std::abs(*r.value - pv) > kEqualityTol) return false;
    }
    return true;
  });

  list.add("conditional_dominance", [&] {
    const std::vector<double> probes = default_y_probes(m, cfg);
    for (double y : probes) {
      const double pv = posterior_variance(m, y, cfg);
      for (PsiFamily family : families) {
        for (double h : kBatteryH) {
          const BoundResult r =
              bound_conditional(m, {family, h, 0.5, {}}, y, cfg);
          if (r.status == BoundStatus::ok &&
              !below(r.value, pv + kMasterSlack)) {
            return false;
          }
        }
      }
    }
    return true;
  });

  list.add("ww_shortcut_consistency", [&] {
    for (double h : kBatteryH) {
      for (double s : kBatteryS) {
        const BoundResult a = bound_ww(m, h, s, cfg);
        const BoundResult b = bound_global(m, {PsiFamily::ww, h, s, {}}, cfg);
        if (a.status != b.status) return false;
        if (a.status == BoundStatus::ok &&
            std::abs(*a.value - *b.value) > kShortcutTol) {
          return false;
        }
      }
    }
    return true;
  });

  list.add("avg_conditional_dominance", [&] {
    for (PsiFamily family : families) {
      for (double h : kBatteryH) {
        for (double s : kBatteryS) {
          const BoundResult a =
              bound_avg_conditional(m, {family, h, s, {}}, cfg);
          const BoundResult b = bound_global(m, {family, h, s, {}}, cfg);
          if (a.status == BoundStatus::ok && b.status == BoundStatus::ok &&
              *a.value < *b.value - kDominanceSlack) {
            return false;
          }
        }
      }
    }
    return true;
  });

  if (m.analytic_score && !m.theta_discrete) {
    list.add("limit_small_shift", [&] {
      const LimitReport rep = limit_check_small_h(m, 1.0, kLimitH, cfg);
      for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        if (rep.rows[i].dev_bound > rep.rows[i - 1].dev_bound) return false;
      }
      return !rep.rows.empty() && rep.rows.back().dev_bound <= 0.01;
    });
  }

  list.add("asymptotic_status", [&] {
    const BoundResult r = bound_asymptotic(m, cfg);
    if (m.theta_discrete) return r.status == BoundStatus::unsupported;
    if (!m.analytic_score && m.y_support_hard) {
      return r.status == BoundStatus::non_regular;
    }
    return r.status == BoundStatus::ok && r.value && std::isfinite(*r.value) &&
           *r.value > 0.0 && r.meta.count("regime_note") == 1;
  });

  if (cfg.mc_samples >= 1000 && m.sample_prior && m.sample_obs &&
      m.analytic_posterior_mean) {
    list.add("mc_risk_agreement", [&] {
      const auto& mu = *m.analytic_posterior_mean;
      const McResult mc = mc_expect_joint(
          m,
          [&](double y, double theta) {
            const double e = theta - mu(y);
            return e * e;
          },
          cfg.mc_samples, cfg.seed, cfg.workers);
      return std::abs(mc.mean - risk) <= 4.0 * mc.std_error;
    });
  }
}

void vector_battery(const VectorModel& m, const IntegrationConfig& cfg,
                    CheckList& list) {
  const Mat sigma = mse_matrix_exact(m, *m.analytic_posterior_mean_g, cfg);
  list.add("matrix_sigma_symmetric", [&] {
    return (sigma - sigma.transpose()).cwiseAbs().maxCoeff() <= kSymmetryTol;
  });

  const int p = m.parameter_dim;
  const int second = p > 1 ? 1 : 0;
  std::vector<VectorPsiSpec> battery;
  {
    VectorPsiSpec a;
    a.components = {{0, 0.5, 0.5}};
    battery.push_back(a);
    VectorPsiSpec b;
    b.components = {{0, 1.0, 0.5}, {second, 0.5, 0.7}};
    battery.push_back(b);
    VectorPsiSpec c;
    c.components = {{0, 1.0, 0.3}, {second, 2.0, 0.5}};
    battery.push_back(c);
    VectorPsiSpec d;
    d.kind = VectorPsiKind::optimal;
    battery.push_back(d);
  }
  const std::vector<Vec> y_probes = {Vec::Zero(m.observation_dim),
                                     Vec::Constant(m.observation_dim, 0.5)};

  // detected rank deficiency is an accepted outcome, not a violation; it is
  // intrinsic when the observation slice cannot span the stacked components
  auto master = [&](BoundFlavor flavor, const std::optional<Vec>& y) {
    int certified = 0;
    for (const VectorPsiSpec& spec : battery) {
      const MatrixBoundResult r = mat_bound(m, spec, flavor, cfg, y);
      if (r.status == MatrixBoundStatus::singular_psi_cov) continue;
      if (r.status != MatrixBoundStatus::ok) return false;
      if ((r.bound_matrix - r.bound_matrix.transpose()).cwiseAbs().maxCoeff() >
          kSymmetryTol) {
        return false;
      }
      if (!check_loewner(sigma, r.bound_matrix, kLoewnerTol).holds) {
        return false;
      }
      ++certified;
    }
    return certified > 0;
  };

  list.add("matrix_master_global",
           [&] { return master(BoundFlavor::global, std::nullopt); });
  list.add("matrix_master_conditional", [&] {
    for (const Vec& y : y_probes) {
      if (!master(BoundFlavor::conditional, y)) return false;
    }
    return true;
  });
  list.add("matrix_master_avg_conditional",
           [&] { return master(BoundFlavor::avg_conditional, std::nullopt); });
  list.add("matrix_master_avg_theta",
           [&] { return master(BoundFlavor::avg_theta, std::nullopt); });

  auto equality = [&](BoundFlavor flavor, const std::optional<Vec>& y) {
    VectorPsiSpec opt;
    opt.kind = VectorPsiKind::optimal;
    const MatrixBoundResult r = mat_bound(m, opt, flavor, cfg, y);
    if (r.status == MatrixBoundStatus::singular_psi_cov) return true;
    if (r.status != MatrixBoundStatus::ok) return false;
    const LoewnerReport lower = check_loewner(sigma, r.bound_matrix, kLoewnerTol);
    const LoewnerReport upper = check_loewner(r.bound_matrix, sigma, kLoewnerTol);
    return lower.holds && upper.holds && lower.min_eigenvalue <= kLoewnerTol;
  };
  list.add("matrix_equality_optimal_global",
           [&] { return equality(BoundFlavor::global, std::nullopt); });
  list.add("matrix_equality_optimal_conditional",
           [&] { return equality(BoundFlavor::conditional, y_probes[0]); });
  list.add("matrix_equality_optimal_avg_conditional",
           [&] { return equality(BoundFlavor::avg_conditional, std::nullopt); });
  list.add("matrix_equality_optimal_avg_theta",
           [&] { return equality(BoundFlavor::avg_theta, std::nullopt); });

  list.add("matrix_singular_detected", [&] {
    VectorPsiSpec constant;
    constant.kind = VectorPsiKind::custom;
    constant.custom_dim = 1;
    constant.custom_fn = [](const Vec&, const Vec&) {
      return Vec::Ones(1).eval();
    };
    const MatrixBoundResult r =
        mat_bound(m, constant, BoundFlavor::global, cfg);
    return r.status == MatrixBoundStatus::singular_psi_cov;
  });
}

int run_verify(const CliModel& model, const IntegrationConfig& cfg,
               const std::optional<std::string>& out_path, std::ostream& out) {
  CheckList list;
  if (model.scalar) {
    scalar_battery(*model.scalar, cfg, list);
  } else {
    vector_battery(*model.vector, cfg, list);
  }
  std::ostringstream text;
  bool all_pass = true;
  for (const auto& [name, pass] : list.checks) {
    text << (pass ? "PASS " : "FAIL ") << name << '\n';
    all_pass = all_pass && pass;
  }
  emit(out, out_path, text.str());
  return all_pass ? 0 : 4;
}

int dispatch(const Args& args, std::ostream& out, std::ostream& err) {
  std::ifstream file(args.config_path);
  if (!file) {
    throw ConfigError("", "cannot open config file '" + args.config_path + "'");
  }
  json cfg_json;
  try {
    cfg_json = json::parse(file);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  require_object(cfg_json, "config");

  const std::string& sub = args.subcommand;
  std::vector<std::string> allowed = {"model", "integration"};
  if (sub == "risk") {
    allowed.push_back("output");
  } else if (sub == "bound") {
    allowed.push_back("bound");
    allowed.push_back("output");
  } else if (sub == "sweep") {
    allowed.push_back("bound");
    allowed.push_back("sweep");
    allowed.push_back("output");
  } else if (sub == "optimize") {
    allowed.push_back("bound");
    allowed.push_back("optimize");
    allowed.push_back("output");
  } else if (sub == "compare") {
    allowed.push_back("optimize");
    allowed.push_back("output");
  }
  reject_unknown(cfg_json, "", allowed);

  const CliModel model = parse_model(cfg_json, sub);
  const IntegrationConfig cfg = parse_integration(cfg_json);
  const OutputCfg output = parse_output(cfg_json);

  if (sub == "risk") {
    return run_risk(model, cfg, output, args.out_path, out);
  }
  if (sub == "bound") {
    const BoundCfg bound = parse_bound_full(cfg_json);
    return run_bound(model, bound, cfg, output, args.out_path, out, err);
  }
  if (sub == "sweep") {
    const BoundCfg bound = parse_bound_family_flavor(cfg_json);
    return run_sweep(model, bound, cfg_json, cfg, output, args.out_path, out,
                     err);
  }
  if (sub == "optimize") {
    const BoundCfg bound = parse_bound_family_flavor(cfg_json);
    return run_optimize(model, bound, cfg_json, cfg, output, args.out_path,
                        out, err);
  }
  if (sub == "compare") {
    return run_compare(model, cfg_json, cfg, output, args.out_path, out, err);
  }
  return run_verify(model, cfg, args.out_path, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  try {
    return dispatch(parse_args(args), out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidSpec& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace riskbound::cli
