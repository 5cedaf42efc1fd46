#include "riskbound/testfn.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "riskbound/errors.hpp"

namespace riskbound {

namespace {

// One ratio term (p_shift / p_base)^expo computed in log space. A vanished
// shifted density contributes 0 (0^s := 0); the caller guarantees the base
// density is alive.
double ratio_term(double log_shift, double log_base, double expo) {
  if (std::isinf(log_shift)) return 0.0;
  return std::exp(expo * (log_shift - log_base));
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(PsiFamily family) {
  switch (family) {
    case PsiFamily::ww: return "ww";
    case PsiFamily::cond: return "cond";
    case PsiFamily::optimal: return "optimal";
    case PsiFamily::custom: return "custom";
  }
  throw DomainError("unknown test-function family");
}

PsiFamily psi_family_from_string(const std::string& text) {
  if (text == "ww") return PsiFamily::ww;
  if (text == "cond") return PsiFamily::cond;
  if (text == "optimal") return PsiFamily::optimal;
  if (text == "custom") return PsiFamily::custom;
  throw InvalidSpec("unknown test-function family '" + text + "'");
}

void validate_psi_spec(const PsiSpec& spec) {
  if (spec.family == PsiFamily::ww || spec.family == PsiFamily::cond) {
    if (!(spec.h != 0.0) || !std::isfinite(spec.h)) {
      throw InvalidSpec("test function requires a finite nonzero h");
    }
    if (!(spec.s > 0.0) || !(spec.s <= 1.0)) {
      throw InvalidSpec("test function requires s in (0, 1]");
    }
  }
  if (spec.family == PsiFamily::custom && !spec.custom_fn) {
    throw InvalidSpec("custom test function requires an evaluator");
  }
}

QuadHints psi_quad_hints(const ScalarModel&, const PsiSpec& spec) {
  QuadHints hints;
  if (spec.family == PsiFamily::ww || spec.family == PsiFamily::cond) {
    const double pad = 2.0 * std::abs(spec.h);
    hints.theta_pad = pad;
    hints.y_pad = pad;
    hints.theta_shifts = {spec.h, -spec.h};
  }
  return hints;
}

Psi make_psi(const ScalarModel& m, const PsiSpec& spec,
             const IntegrationConfig& cfg) {
  validate_psi_spec(spec);
  Psi psi;
  psi.hints = psi_quad_hints(m, spec);
  const double h = spec.h;
  const double s = spec.s;
  switch (spec.family) {
    case PsiFamily::ww: {
      psi.label = "ww(h=" + fmt(h) + ",s=" + fmt(s) + ")";
      psi.zero_mean_given_y = true;
      psi.eval = [&m, h, s](double y, double theta) {
        const double base = m.log_prior(theta) + m.log_likelihood(y, theta);
        if (std::isinf(base)) return 0.0;
        const double up =
            m.log_prior(theta + h) + m.log_likelihood(y, theta + h);
        const double dn =
            m.log_prior(theta - h) + m.log_likelihood(y, theta - h);
        return ratio_term(up, base, s) - ratio_term(dn, base, 1.0 - s);
      };
      break;
    }
    case PsiFamily::cond: {
      psi.label = "cond(h=" + fmt(h) + ",s=" + fmt(s) + ")";
      psi.eval = [&m, h, s](double y, double theta) {
        const double base = m.log_likelihood(y, theta);
        if (std::isinf(base)) return 0.0;
        const double up = m.log_likelihood(y, theta + h);
        const double dn = m.log_likelihood(y, theta - h);
        return ratio_term(up, base, s) - ratio_term(dn, base, 1.0 - s);
      };
      break;
    }
    case PsiFamily::optimal: {
      psi.label = "optimal";
      psi.zero_mean_given_y = true;
      auto mu = make_posterior_mean_memo(m, cfg);
      psi.eval = [mu](double y, double theta) { return theta - mu(y); };
      break;
    }
    case PsiFamily::custom: {
      psi.label = "custom";
      psi.eval = spec.custom_fn;
      break;
    }
  }
  return psi;
}

double eval_psi(const PsiSpec& spec, const ScalarModel& m, double y,
                double theta, const IntegrationConfig& cfg) {
  return make_psi(m, spec, cfg).eval(y, theta);
}

std::vector<double> default_y_probes(const ScalarModel& m,
                                     const IntegrationConfig& cfg) {
  validate_config(cfg);
  if (m.observation_space.kind == SpaceKind::finite) {
    return m.observation_space.points;
  }
  const Interval r = m.y_marginal_range(3.0);
  std::vector<double> probes;
  probes.reserve(21);
  for (int i = 0; i < 21; ++i) {
    probes.push_back(r.lo + (r.hi - r.lo) * i / 20.0);
  }
  return probes;
}

ConditionReport check_zero_condition(const ScalarModel& m,
                                     const PsiSpec& spec,
                                     const std::vector<double>& y_probes,
                                     const IntegrationConfig& cfg) {
  if (y_probes.empty()) {
    throw InvalidSpec("check_zero_condition requires at least one probe");
  }
  const Psi psi = make_psi(m, spec, cfg);
  ConditionReport report;
  report.worst_y = y_probes.front();
  for (double y : y_probes) {
    const double dev = std::abs(expect_given_y(
        m, [&](double theta) { return psi.eval(y, theta); }, y, cfg,
        psi.hints));
    if (dev > report.max_abs_dev) {
      report.max_abs_dev = dev;
      report.worst_y = y;
    }
  }
  report.pass = report.max_abs_dev <= 1e-8;
  return report;
}

}  // namespace riskbound
