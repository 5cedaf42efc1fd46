#include "riskbound/bounds.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "riskbound/errors.hpp"
#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

constexpr double kEvFloor = 1e-300;
constexpr double kDegenRel = 1e-14;
constexpr double kMassGate = 1e-12;
constexpr double kInfoFloor = 1e-12;
constexpr double kFdStep = 1e-5;
constexpr double kZeroCondTol = 1e-6;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool degenerate_den(double den, double scale) {
  return den < kDegenRel * std::max(1.0, scale);
}

void require_observation(const ScalarModel& m, double y) {
  if (!m.observation_space.contains(y)) {
    throw DomainError("observation outside the model's space");
  }
}

// Unnormalized theta-integrals {1, t, psi, t*psi, psi^2} at one y. The
// test function is evaluated once per node and shared across integrands.
std::array<double, 5> psi_slice_at_y(const ScalarModel& m, const Psi& psi,
                                     double y, const IntegrationConfig& cfg) {
  double last_t = kNaN;
  double last_psi = 0.0;
  auto psi_at = [&](double t) {
    if (t != last_t) {
      last_psi = psi.eval(y, t);
      last_t = t;
    }
    return last_psi;
  };
  const std::vector<Fn1> fns = {
      [](double) { return 1.0; },
      [](double t) { return t; },
      [&](double t) { return psi_at(t); },
      [&](double t) { return t * psi_at(t); },
      [&](double t) { const double p = psi_at(t); return p * p; },
  };
  const std::vector<double> raw = joint_slice_at_y(m, y, fns, cfg, psi.hints);
  return {raw[0], raw[1], raw[2], raw[3], raw[4]};
}

// Normalized y-integrals {num, den} = {E[(t - mu(y)) psi | t], E[psi^2 | t]}
// at one theta.
std::array<double, 2> psi_slice_at_theta(
    const ScalarModel& m, const Psi& psi,
    const std::function<double(double)>& mu, double theta,
    const IntegrationConfig& cfg) {
  double last_y = kNaN;
  double last_psi = 0.0;
  auto psi_at = [&](double y) {
    if (y != last_y) {
      last_psi = psi.eval(y, theta);
      last_y = y;
    }
    return last_psi;
  };
  const std::vector<Fn1> fns = {
      [&](double y) { return (theta - mu(y)) * psi_at(y); },
      [&](double y) { const double p = psi_at(y); return p * p; },
  };
  const std::vector<double> raw =
      slice_at_theta(m, theta, fns, cfg, psi.hints);
  return {raw[0], raw[1]};
}

struct JointMoments {
  double e_psi = 0.0;
  double e_psi2 = 0.0;
  double e_eps_psi = 0.0;    // E[(theta - mu(y)) psi]
  double e_theta_psi = 0.0;  // E[theta psi]
};

JointMoments joint_psi_moments(const ScalarModel& m, const Psi& psi,
                               const IntegrationConfig& cfg, bool need_mu) {
  const QuadAxis axis = marginal_y_axis(m, cfg, psi.hints);
  const std::size_t n = axis.nodes.size();
  std::vector<std::array<double, 5>> slots(n, {0, 0, 0, 0, 0});
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    slots[i] = psi_slice_at_y(m, psi, axis.nodes[i], cfg);
  });
  std::vector<double> c_psi(n, 0.0), c_psi2(n, 0.0), c_eps(n, 0.0),
      c_tpsi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [ev, m1, p1, tp, p2] = slots[i];
    if (!(ev >= kEvFloor)) continue;
    const double w = axis.weights[i];
    c_psi[i] = w * p1;
    c_psi2[i] = w * p2;
    c_tpsi[i] = w * tp;
    if (need_mu) {
      const double mu = m.analytic_posterior_mean
                            ? (*m.analytic_posterior_mean)(axis.nodes[i])
                            : m1 / ev;
      c_eps[i] = w * (tp - mu * p1);
    }
  }
  JointMoments out;
  out.e_psi = pairwise_sum(c_psi);
  out.e_psi2 = pairwise_sum(c_psi2);
  out.e_theta_psi = pairwise_sum(c_tpsi);
  out.e_eps_psi = pairwise_sum(c_eps);
  return out;
}

struct CondMoments {
  double mu = 0.0;
  double e_psi = 0.0;
  double e_theta_psi = 0.0;
  double e_psi2 = 0.0;
  double e_eps_psi = 0.0;
};

CondMoments cond_psi_moments(const ScalarModel& m, const Psi& psi, double y,
                             const IntegrationConfig& cfg) {
  const auto [ev, m1, p1, tp, p2] = psi_slice_at_y(m, psi, y, cfg);
  if (!(ev >= kEvFloor)) {
    throw ZeroEvidence("evidence underflow at y=" + std::to_string(y));
  }
  CondMoments out;
  out.mu = m.analytic_posterior_mean ? (*m.analytic_posterior_mean)(y)
                                     : m1 / ev;
  out.e_psi = p1 / ev;
  out.e_theta_psi = tp / ev;
  out.e_psi2 = p2 / ev;
  out.e_eps_psi = out.e_theta_psi - out.mu * out.e_psi;
  return out;
}

void attach_psi_meta(BoundResult& r, const PsiSpec& spec) {
  if (spec.family == PsiFamily::ww || spec.family == PsiFamily::cond) {
    r.meta["h"] = spec.h;
    r.meta["s"] = spec.s;
  }
}

BoundResult ratio_result(BoundFlavor flavor, double num_sq, double den,
                         double scale) {
  BoundResult r;
  r.flavor = flavor;
  r.numerator = num_sq;
  r.denominator = den;
  if (degenerate_den(den, scale)) {
    r.status = BoundStatus::degenerate_denominator;
  } else {
    r.status = BoundStatus::ok;
    r.value = num_sq / den;
  }
  return r;
}

double zero_condition_dev_or_throw(const ScalarModel& m, double h, double s,
                                   const IntegrationConfig& cfg) {
  PsiSpec spec;
  spec.family = PsiFamily::ww;
  spec.h = h;
  spec.s = s;
  const ConditionReport report =
      check_zero_condition(m, spec, default_y_probes(m, cfg), cfg);
  if (report.max_abs_dev > kZeroCondTol) {
    throw ConditionViolated(
        "zero-mean condition failed: |E[psi|y]| = " +
        std::to_string(report.max_abs_dev) + " at y = " +
        std::to_string(report.worst_y));
  }
  return report.max_abs_dev;
}

}  // namespace

std::string to_string(BoundFlavor flavor) {
  switch (flavor) {
    case BoundFlavor::global: return "global";
    case BoundFlavor::conditional: return "conditional";
    case BoundFlavor::avg_conditional: return "avg_conditional";
    case BoundFlavor::avg_theta: return "avg_theta";
    case BoundFlavor::ww: return "ww";
    case BoundFlavor::ww_conditional: return "ww_conditional";
    case BoundFlavor::asymptotic: return "asymptotic";
    case BoundFlavor::exact_risk: return "exact_risk";
  }
  throw DomainError("unknown bound flavor");
}

std::string to_string(BoundStatus status) {
  switch (status) {
    case BoundStatus::ok: return "ok";
    case BoundStatus::degenerate_denominator: return "degenerate_denominator";
    case BoundStatus::non_regular: return "non_regular";
    case BoundStatus::unsupported: return "unsupported";
  }
  throw DomainError("unknown bound status");
}

BoundFlavor bound_flavor_from_string(const std::string& text) {
  if (text == "global") return BoundFlavor::global;
  if (text == "conditional") return BoundFlavor::conditional;
  if (text == "avg_conditional") return BoundFlavor::avg_conditional;
  if (text == "avg_theta") return BoundFlavor::avg_theta;
  if (text == "ww") return BoundFlavor::ww;
  if (text == "ww_conditional") return BoundFlavor::ww_conditional;
  if (text == "asymptotic") return BoundFlavor::asymptotic;
  if (text == "exact_risk") return BoundFlavor::exact_risk;
  throw InvalidSpec("unknown bound flavor '" + text + "'");
}

BoundResult bayes_risk_exact(const ScalarModel& m,
                             const IntegrationConfig& cfg) {
  const QuadAxis axis = marginal_y_axis(m, cfg);
  const std::size_t n = axis.nodes.size();
  std::vector<std::array<double, 3>> slots(n, {0, 0, 0});
  const std::vector<Fn1> fns = {
      [](double) { return 1.0; },
      [](double t) { return t; },
      [](double t) { return t * t; },
  };
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const std::vector<double> raw =
        joint_slice_at_y(m, axis.nodes[i], fns, cfg);
    slots[i] = {raw[0], raw[1], raw[2]};
  });
  std::vector<double> contrib(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [ev, m1, m2] = slots[i];
    if (!(ev >= kEvFloor)) continue;
    const double mu = m.analytic_posterior_mean
                          ? (*m.analytic_posterior_mean)(axis.nodes[i])
                          : m1 / ev;
    contrib[i] = axis.weights[i] * (m2 - 2.0 * mu * m1 + mu * mu * ev);
  }
  BoundResult r;
  r.flavor = BoundFlavor::exact_risk;
  r.status = BoundStatus::ok;
  r.value = pairwise_sum(contrib);
  r.numerator = r.value;
  r.denominator = 1.0;
  return r;
}

double mse_of_estimator(const ScalarModel& m, const Estimator& est,
                        const IntegrationConfig& cfg) {
  if (!est.rule) throw InvalidSpec("estimator has no rule");
  return expect_joint(
      m,
      [&](double y, double theta) {
        const double e = theta - est.rule(y);
        return e * e;
      },
      cfg);
}

double posterior_variance(const ScalarModel& m, double y,
                          const IntegrationConfig& cfg) {
  require_observation(m, y);
  const std::vector<Fn1> fns = {
      [](double) { return 1.0; },
      [](double t) { return t; },
      [](double t) { return t * t; },
  };
  const std::vector<double> raw = joint_slice_at_y(m, y, fns, cfg);
  if (!(raw[0] >= kEvFloor)) {
    throw ZeroEvidence("evidence underflow at y=" + std::to_string(y));
  }
  const double mean = raw[1] / raw[0];
  return raw[2] / raw[0] - mean * mean;
}

BoundResult bound_global(const ScalarModel& m, const PsiSpec& spec,
                         const IntegrationConfig& cfg) {
  const Psi psi = make_psi(m, spec, cfg);
  const JointMoments mom = joint_psi_moments(m, psi, cfg, /*need_mu=*/true);
  const double den = mom.e_psi2 - mom.e_psi * mom.e_psi;
  BoundResult r = ratio_result(BoundFlavor::global,
                               mom.e_eps_psi * mom.e_eps_psi, den,
                               mom.e_psi2);
  attach_psi_meta(r, spec);
  return r;
}

BoundResult bound_conditional(const ScalarModel& m, const PsiSpec& spec,
                              double y, const IntegrationConfig& cfg) {
  require_observation(m, y);
  const Psi psi = make_psi(m, spec, cfg);
  const CondMoments mom = cond_psi_moments(m, psi, y, cfg);
  const double den = mom.e_psi2 - mom.e_psi * mom.e_psi;
  BoundResult r = ratio_result(BoundFlavor::conditional,
                               mom.e_eps_psi * mom.e_eps_psi, den,
                               mom.e_psi2);
  attach_psi_meta(r, spec);
  r.meta["y"] = y;
  return r;
}

BoundResult bound_avg_conditional(const ScalarModel& m, const PsiSpec& spec,
                                  const IntegrationConfig& cfg) {
  const Psi psi = make_psi(m, spec, cfg);
  const QuadAxis axis = marginal_y_axis(m, cfg, psi.hints);
  const std::size_t n = axis.nodes.size();
  std::vector<std::array<double, 5>> slots(n, {0, 0, 0, 0, 0});
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    slots[i] = psi_slice_at_y(m, psi, axis.nodes[i], cfg);
  });
  std::vector<double> contrib(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& [ev, m1, p1, tp, p2] = slots[i];
    if (!(ev >= kEvFloor)) continue;
    const double mass = axis.weights[i] * ev;
    const double mu = m.analytic_posterior_mean
                          ? (*m.analytic_posterior_mean)(axis.nodes[i])
                          : m1 / ev;
    const double num = (tp - mu * p1) / ev;
    const double scale = p2 / ev;
    const double den = scale - (p1 / ev) * (p1 / ev);
    if (degenerate_den(den, scale)) {
      if (mass > kMassGate) {
        BoundResult r;
        r.flavor = BoundFlavor::avg_conditional;
        r.status = BoundStatus::degenerate_denominator;
        attach_psi_meta(r, spec);
        r.meta["degenerate_at_y"] = axis.nodes[i];
        return r;
      }
      continue;
    }
    contrib[i] = mass * num * num / den;
  }
  BoundResult r;
  r.flavor = BoundFlavor::avg_conditional;
  r.status = BoundStatus::ok;
  r.value = pairwise_sum(contrib);
  r.numerator = r.value;
  r.denominator = 1.0;
  attach_psi_meta(r, spec);
  return r;
}

BoundResult bound_avg_theta(const ScalarModel& m, const PsiSpec& spec,
                            const IntegrationConfig& cfg) {
  const Psi psi = make_psi(m, spec, cfg);
  const auto mu = make_posterior_mean_memo(m, cfg);
  const QuadAxis axis = prior_theta_axis(m, cfg, psi.hints);
  const std::size_t n = axis.nodes.size();
  std::vector<std::array<double, 2>> slots(n, {0, 0});
  std::vector<double> mass(n, 0.0);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const double theta = axis.nodes[i];
    const double pr = m.prior(theta);
    if (!(pr > 0.0)) return;
    mass[i] = axis.weights[i] * pr;
    slots[i] = psi_slice_at_theta(m, psi, mu, theta, cfg);
  });
  std::vector<double> contrib(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mass[i] > 0.0)) continue;
    const auto& [num, den] = slots[i];
    if (degenerate_den(den, den)) {
      if (mass[i] > kMassGate) {
        BoundResult r;
        r.flavor = BoundFlavor::avg_theta;
        r.status = BoundStatus::degenerate_denominator;
        attach_psi_meta(r, spec);
        r.meta["degenerate_at_theta"] = axis.nodes[i];
        return r;
      }
      continue;
    }
    contrib[i] = mass[i] * num * num / den;
  }
  BoundResult r;
  r.flavor = BoundFlavor::avg_theta;
  r.status = BoundStatus::ok;
  r.value = pairwise_sum(contrib);
  r.numerator = r.value;
  r.denominator = 1.0;
  attach_psi_meta(r, spec);
  return r;
}

BoundResult bound_ww(const ScalarModel& m, double h, double s,
                     const IntegrationConfig& cfg) {
  PsiSpec spec;
  spec.family = PsiFamily::ww;
  spec.h = h;
  spec.s = s;
  validate_psi_spec(spec);
  const double dev = zero_condition_dev_or_throw(m, h, s, cfg);
  const Psi psi = make_psi(m, spec, cfg);
  const JointMoments mom = joint_psi_moments(m, psi, cfg, /*need_mu=*/false);
  BoundResult r = ratio_result(BoundFlavor::ww,
                               mom.e_theta_psi * mom.e_theta_psi,
                               mom.e_psi2, mom.e_psi2);
  r.meta["h"] = h;
  r.meta["s"] = s;
  r.meta["zero_condition_dev"] = dev;
  return r;
}

BoundResult bound_ww_conditional(const ScalarModel& m, double h, double s,
                                 double y, const IntegrationConfig& cfg) {
  require_observation(m, y);
  PsiSpec spec;
  spec.family = PsiFamily::ww;
  spec.h = h;
  spec.s = s;
  validate_psi_spec(spec);
  const Psi psi = make_psi(m, spec, cfg);
  const CondMoments mom = cond_psi_moments(m, psi, y, cfg);
  const double dev = std::abs(mom.e_psi);
  if (dev > kZeroCondTol) {
    throw ConditionViolated("zero-mean condition failed at y = " +
                            std::to_string(y) +
                            ": |E[psi|y]| = " + std::to_string(dev));
  }
  BoundResult r = ratio_result(BoundFlavor::ww_conditional,
                               mom.e_theta_psi * mom.e_theta_psi,
                               mom.e_psi2, mom.e_psi2);
  r.meta["h"] = h;
  r.meta["s"] = s;
  r.meta["y"] = y;
  r.meta["zero_condition_dev"] = dev;
  return r;
}

BoundResult bound_asymptotic(const ScalarModel& m,
                             const IntegrationConfig& cfg) {
  BoundResult r;
  r.flavor = BoundFlavor::asymptotic;
  if (m.theta_discrete) {
    r.status = BoundStatus::unsupported;
    return r;
  }
  const QuadAxis axis = prior_theta_axis(m, cfg);
  const std::size_t n = axis.nodes.size();
  std::vector<double> mass(n, 0.0);
  std::vector<double> info(n, 0.0);
  std::vector<int> trip(n, 0);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const double theta = axis.nodes[i];
    mass[i] = axis.weights[i] * m.prior(theta);
    if (!(mass[i] > kMassGate)) return;
    if (m.analytic_score) {
      const auto& score = *m.analytic_score;
      info[i] = expect_given_theta(
          m,
          [&](double y) {
            const double v = score(y, theta);
            return v * v;
          },
          theta, cfg);
      return;
    }
    // Central finite-difference score with a support-shift detector and a
    // step-halving consistency probe.
    bool shifted = false;
    auto fd_info = [&](double eps) {
      return expect_given_theta(
          m,
          [&](double y) {
            const double lp = m.log_likelihood(y, theta + eps);
            const double lm = m.log_likelihood(y, theta - eps);
            if (std::isinf(lp) || std::isinf(lm)) {
              shifted = true;
              return 0.0;
            }
            const double sc = (lp - lm) / (2.0 * eps);
            return sc * sc;
          },
          theta, cfg);
    };
    const double full = fd_info(kFdStep);
    const double half = fd_info(0.5 * kFdStep);
    if (shifted ||
        std::abs(full - half) > 1e-4 * std::max(std::abs(half), kEvFloor)) {
      trip[i] = 1;
      return;
    }
    info[i] = half;
  });
  std::vector<double> contrib(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(mass[i] > kMassGate)) continue;
    if (trip[i] != 0 || info[i] < kInfoFloor) {
      r.status = BoundStatus::non_regular;
      return r;
    }
    contrib[i] = mass[i] / info[i];
  }
  r.status = BoundStatus::ok;
  r.value = pairwise_sum(contrib);
  r.numerator = r.value;
  r.denominator = 1.0;
  r.meta["regime_note"] = 1.0;
  return r;
}

LimitReport limit_check_small_h(const ScalarModel& m, double s,
                                const std::vector<double>& h_sequence,
                                const IntegrationConfig& cfg) {
  if (s != 1.0) throw InvalidSpec("the small-shift limit check requires s=1");
  if (h_sequence.empty()) throw InvalidSpec("h_sequence must be nonempty");
  for (std::size_t i = 0; i < h_sequence.size(); ++i) {
    if (!(h_sequence[i] >= 1e-3)) {
      throw InvalidSpec("h_sequence entries must be >= 1e-3");
    }
    if (i > 0 && !(h_sequence[i] < h_sequence[i - 1])) {
      throw InvalidSpec("h_sequence must be strictly decreasing");
    }
  }
  if (!m.analytic_score) {
    throw InvalidSpec("the small-shift limit check requires an analytic score");
  }

  const auto mu = make_posterior_mean_memo(m, cfg);
  const QuadAxis axis = prior_theta_axis(m, cfg);
  const std::size_t n = axis.nodes.size();

  // h -> 0 targets: prior averages of the Fisher information, of the slope
  // of E[posterior mean | theta], and of slope^2 / information.
  std::vector<double> c_info(n, 0.0), c_slope(n, 0.0), c_ratio(n, 0.0);
  std::vector<double> mass(n, 0.0);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const double theta = axis.nodes[i];
    mass[i] = axis.weights[i] * m.prior(theta);
    if (!(mass[i] > kMassGate)) return;
    const auto& score = *m.analytic_score;
    const double info = expect_given_theta(
        m,
        [&](double y) {
          const double v = score(y, theta);
          return v * v;
        },
        theta, cfg);
    if (!(info >= kInfoFloor)) {
      throw NonFinite("information vanished at a prior-weighted node");
    }
    auto mean_mu_at = [&](double t) {
      return expect_given_theta(m, [&](double y) { return mu(y); }, t, cfg);
    };
    const double slope =
        (mean_mu_at(theta + kFdStep) - mean_mu_at(theta - kFdStep)) /
        (2.0 * kFdStep);
    c_info[i] = mass[i] * info;
    c_slope[i] = mass[i] * slope;
    c_ratio[i] = mass[i] * slope * slope / info;
  });

  LimitReport report;
  report.limit_den_over_h2 = pairwise_sum(c_info);
  report.limit_num_over_h = -pairwise_sum(c_slope);
  report.limit_bound = pairwise_sum(c_ratio);

  for (double h : h_sequence) {
    PsiSpec spec;
    spec.family = PsiFamily::cond;
    spec.h = h;
    spec.s = s;
    const Psi psi = make_psi(m, spec, cfg);
    std::vector<double> c_num(n, 0.0), c_den(n, 0.0), c_bnd(n, 0.0);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
      if (!(mass[i] > kMassGate)) return;
      const auto [num, den] =
          psi_slice_at_theta(m, psi, mu, axis.nodes[i], cfg);
      c_num[i] = mass[i] * num;
      c_den[i] = mass[i] * den;
      if (!degenerate_den(den, den)) c_bnd[i] = mass[i] * num * num / den;
    });
    LimitRow row;
    row.h = h;
    row.num_over_h = pairwise_sum(c_num) / h;
    row.den_over_h2 = pairwise_sum(c_den) / (h * h);
    row.bound = pairwise_sum(c_bnd);
    row.dev_num = std::abs(row.num_over_h - report.limit_num_over_h);
    row.dev_den = std::abs(row.den_over_h2 - report.limit_den_over_h2);
    row.dev_bound = std::abs(row.bound - report.limit_bound);
    report.rows.push_back(row);
  }

  if (report.rows.size() >= 2) {
    bool positive = true;
    for (const LimitRow& row : report.rows) {
      if (!(row.dev_bound > 0.0)) positive = false;
    }
    if (positive) {
      // Least-squares slope of log(dev_bound) against log(h).
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      const double k = static_cast<double>(report.rows.size());
      for (const LimitRow& row : report.rows) {
        const double x = std::log(row.h);
        const double y = std::log(row.dev_bound);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double denom = k * sxx - sx * sx;
      if (denom > 0.0) report.fitted_order = (k * sxy - sx * sy) / denom;
    }
  }
  return report;
}

}  // namespace riskbound
