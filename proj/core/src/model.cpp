#include "riskbound/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "riskbound/errors.hpp"
#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

constexpr double kDensityFloor = 1e-300;
constexpr double kPointTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

double guarded_log(double density) {
  return density < kDensityFloor ? -kInf : std::log(density);
}

double gauss_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return std::exp(-0.5 * z * z / var) /
         std::sqrt(2.0 * std::numbers::pi * var);
}

double gauss_log_pdf(double x, double mean, double var) {
  const double z = x - mean;
  return -0.5 * z * z / var -
         0.5 * std::log(2.0 * std::numbers::pi * var);
}

std::string fmt_param(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Quadrature mass of `f` over one coordinate of `space`, boxed by `box` for
// interval spaces. Used only for construction-time normalization checks.
double space_mass(const Space& space, Interval box,
                  const std::function<double(double)>& f) {
  if (space.kind == SpaceKind::finite) {
    std::vector<double> terms;
    terms.reserve(space.points.size());
    for (double p : space.points) terms.push_back(f(p));
    return pairwise_sum(terms);
  }
  const auto& rule = gauss_legendre(201);
  const double mid = 0.5 * (box.lo + box.hi);
  const double half = 0.5 * (box.hi - box.lo);
  std::vector<double> terms;
  terms.reserve(rule.nodes.size());
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    terms.push_back(rule.weights[i] * f(mid + half * rule.nodes[i]));
  }
  return half * pairwise_sum(terms);
}

void check_normalization(const ScalarModel& m) {
  const double prior_mass =
      space_mass(m.parameter_space, m.theta_range(10.0), m.prior);
  if (std::abs(prior_mass - 1.0) > 1e-8) {
    throw InvalidSpec("model '" + m.label + "': prior mass " +
                      fmt_param(prior_mass) + " is not 1 within 1e-8");
  }
  std::vector<double> probes;
  if (m.parameter_space.kind == SpaceKind::finite) {
    probes = m.parameter_space.points;
  } else {
    const Interval r = m.theta_range(2.0);
    for (int i = 0; i < 11; ++i) {
      probes.push_back(r.lo + (r.hi - r.lo) * (i + 0.5) / 11.0);
    }
  }
  for (double theta : probes) {
    const double mass = space_mass(
        m.observation_space, m.y_range_given_theta(theta, 10.0),
        [&](double y) { return m.likelihood(y, theta); });
    if (std::abs(mass - 1.0) > 1e-8) {
      throw InvalidSpec("model '" + m.label + "': likelihood mass " +
                        fmt_param(mass) + " at theta=" + fmt_param(theta) +
                        " is not 1 within 1e-8");
    }
  }
}

ScalarModel build_gaussian_gaussian(const GaussianGaussianSpec& s) {
  if (!(s.var_prior > 0.0) || !std::isfinite(s.var_prior)) {
    throw InvalidSpec("gaussian_gaussian: var_prior must be finite and > 0");
  }
  if (!(s.var_noise > 0.0) || !std::isfinite(s.var_noise)) {
    throw InvalidSpec("gaussian_gaussian: var_noise must be finite and > 0");
  }
  if (s.n_obs < 1) throw InvalidSpec("gaussian_gaussian: n_obs must be >= 1");

  const double vp = s.var_prior;
  const double vn = s.var_noise;
  const int n = s.n_obs;
  const double vr = vn / n;  // variance of the sample mean
  const double shrink = vp / (vp + vr);
  const double post_var = vp * vr / (vp + vr);

  ScalarModel m;
  m.kind = "gaussian_gaussian";
  m.label = "gaussian_gaussian(var_prior=" + fmt_param(vp) +
            ",var_noise=" + fmt_param(vn) + ",n_obs=" + std::to_string(n) +
            ")";
  m.parameter_space = {SpaceKind::interval, -kInf, kInf, {}};
  m.observation_space = {SpaceKind::interval, -kInf, kInf, {}};
  m.obs_dim = n;

  m.prior = [vp](double t) { return gauss_pdf(t, 0.0, vp); };
  m.log_prior = [vp](double t) {
    const double l = gauss_log_pdf(t, 0.0, vp);
    return l < std::log(kDensityFloor) ? -kInf : l;
  };
  m.likelihood = [vr](double y, double t) { return gauss_pdf(y, t, vr); };
  m.log_likelihood = [vr](double y, double t) {
    const double l = gauss_log_pdf(y, t, vr);
    return l < std::log(kDensityFloor) ? -kInf : l;
  };
  m.likelihood_full = [vn, n](ObsView y, double t) {
    if (static_cast<int>(y.size()) != n) {
      throw DomainError("observation size does not match obs_dim");
    }
    double log_l = 0.0;
    for (double yi : y) log_l += gauss_log_pdf(yi, t, vn);
    return log_l < std::log(kDensityFloor) ? 0.0 : std::exp(log_l);
  };

  m.analytic_posterior_mean = [shrink](double y) { return shrink * y; };
  m.analytic_score = [vr](double y, double t) { return (y - t) / vr; };

  const double sp = std::sqrt(vp);
  const double sr = std::sqrt(vr);
  const double spost = std::sqrt(post_var);
  m.theta_range = [sp](double k) { return Interval{-k * sp, k * sp}; };
  m.y_range_given_theta = [sr](double t, double k) {
    return Interval{t - k * sr, t + k * sr};
  };
  m.theta_range_given_y = [shrink, spost](double y, double k) {
    const double mu = shrink * y;
    return Interval{mu - k * spost, mu + k * spost};
  };
  const double sm = std::sqrt(vp + vr);
  m.y_marginal_range = [sm](double k) { return Interval{-k * sm, k * sm}; };

  m.sample_prior = [sp](Rng& rng) { return sp * rng.normal(); };
  m.sample_obs = [sr](double t, Rng& rng) { return t + sr * rng.normal(); };
  return m;
}

ScalarModel build_discrete_channel(const DiscreteChannelSpec& s) {
  if (!(s.flip_prob > 0.0) || !(s.flip_prob < 0.5)) {
    throw InvalidSpec("discrete_channel: flip_prob must lie in (0, 0.5)");
  }
  const double f = s.flip_prob;

  ScalarModel m;
  m.kind = "discrete_channel";
  m.label = "discrete_channel(flip_prob=" + fmt_param(f) + ")";
  m.parameter_space = {SpaceKind::finite, -1.0, 1.0, {-1.0, 1.0}};
  m.observation_space = {SpaceKind::finite, -1.0, 1.0, {-1.0, 1.0}};
  m.obs_dim = 1;
  m.theta_discrete = true;
  m.obs_discrete = true;

  auto snap = [](double x) -> double {
    if (std::abs(x - 1.0) <= kPointTol) return 1.0;
    if (std::abs(x + 1.0) <= kPointTol) return -1.0;
    return 0.0;  // off-support marker
  };
  m.prior = [snap](double t) { return snap(t) == 0.0 ? 0.0 : 0.5; };
  m.log_prior = [snap](double t) {
    return snap(t) == 0.0 ? -kInf : std::log(0.5);
  };
  m.likelihood = [f, snap](double y, double t) {
    const double ys = snap(y);
    const double ts = snap(t);
    if (ys == 0.0 || ts == 0.0) return 0.0;
    return ys == ts ? 1.0 - f : f;
  };
  m.log_likelihood = [m_l = m.likelihood](double y, double t) {
    return guarded_log(m_l(y, t));
  };
  m.likelihood_full = [m_l = m.likelihood](ObsView y, double t) {
    if (y.size() != 1) {
      throw DomainError("observation size does not match obs_dim");
    }
    return m_l(y[0], t);
  };

  m.analytic_posterior_mean = [f, snap](double y) {
    const double ys = snap(y);
    if (ys == 0.0) throw DomainError("observation outside channel alphabet");
    return ys * (1.0 - 2.0 * f);
  };

  m.theta_range = [](double) { return Interval{-1.0, 1.0}; };
  m.y_range_given_theta = [](double, double) { return Interval{-1.0, 1.0}; };
  m.theta_range_given_y = [](double, double) { return Interval{-1.0, 1.0}; };
  m.y_marginal_range = [](double) { return Interval{-1.0, 1.0}; };

  m.sample_prior = [](Rng& rng) {
    return rng.uniform01() <= 0.5 ? -1.0 : 1.0;
  };
  m.sample_obs = [f](double t, Rng& rng) {
    return rng.uniform01() <= f ? -t : t;
  };
  return m;
}

ScalarModel build_uniform_location(const UniformLocationSpec& s) {
  if (!(s.prior_var > 0.0) || !std::isfinite(s.prior_var)) {
    throw InvalidSpec("uniform_location: prior_var must be finite and > 0");
  }
  if (!(s.width > 0.0) || !std::isfinite(s.width)) {
    throw InvalidSpec("uniform_location: width must be finite and > 0");
  }
  const double pv = s.prior_var;
  const double w = s.width;
  const double hw = 0.5 * w;

  ScalarModel m;
  m.kind = "uniform_location";
  m.label = "uniform_location(prior_var=" + fmt_param(pv) +
            ",width=" + fmt_param(w) + ")";
  m.parameter_space = {SpaceKind::interval, -kInf, kInf, {}};
  m.observation_space = {SpaceKind::interval, -kInf, kInf, {}};
  m.obs_dim = 1;
  m.y_support_hard = true;
  m.theta_support_hard_given_y = true;

  m.prior = [pv](double t) { return gauss_pdf(t, 0.0, pv); };
  m.log_prior = [pv](double t) {
    const double l = gauss_log_pdf(t, 0.0, pv);
    return l < std::log(kDensityFloor) ? -kInf : l;
  };
  m.likelihood = [w, hw](double y, double t) {
    return std::abs(y - t) <= hw ? 1.0 / w : 0.0;
  };
  m.log_likelihood = [m_l = m.likelihood](double y, double t) {
    return guarded_log(m_l(y, t));
  };
  m.likelihood_full = [m_l = m.likelihood](ObsView y, double t) {
    if (y.size() != 1) {
      throw DomainError("observation size does not match obs_dim");
    }
    return m_l(y[0], t);
  };

  const double sp = std::sqrt(pv);
  m.theta_range = [sp](double k) { return Interval{-k * sp, k * sp}; };
  m.y_range_given_theta = [hw](double t, double) {
    return Interval{t - hw, t + hw};
  };
  m.theta_range_given_y = [hw](double y, double) {
    return Interval{y - hw, y + hw};
  };
  m.y_marginal_range = [sp, hw](double k) {
    return Interval{-k * sp - hw, k * sp + hw};
  };

  m.sample_prior = [sp](Rng& rng) { return sp * rng.normal(); };
  m.sample_obs = [w, hw](double t, Rng& rng) {
    return t - hw + w * rng.uniform01();
  };
  return m;
}

}  // namespace

bool Space::contains(double x) const {
  if (kind == SpaceKind::finite) {
    for (double p : points) {
      if (std::abs(x - p) <= kPointTol) return true;
    }
    return false;
  }
  return x >= lo && x <= hi;
}

double ScalarModel::reduce(ObsView y) const {
  if (static_cast<int>(y.size()) != obs_dim) {
    throw DomainError("observation size does not match obs_dim");
  }
  if (obs_dim == 1) return y[0];
  double acc = 0.0;
  for (double yi : y) acc += yi;
  return acc / obs_dim;
}

ScalarModel make_model(const ModelSpec& spec) {
  ScalarModel m = std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, GaussianGaussianSpec>) {
          return build_gaussian_gaussian(s);
        } else if constexpr (std::is_same_v<T, DiscreteChannelSpec>) {
          return build_discrete_channel(s);
        } else {
          return build_uniform_location(s);
        }
      },
      spec);
  check_normalization(m);
  return m;
}

double joint_density(const ScalarModel& m, ObsView y, double theta) {
  return m.prior(theta) * m.likelihood_full(y, theta);
}

double conditional_density(const ScalarModel& m, ObsView y, double theta) {
  return m.likelihood_full(y, theta);
}

double joint_density(const ScalarModel& m, double y, double theta) {
  return m.prior(theta) * m.likelihood(y, theta);
}

double conditional_density(const ScalarModel& m, double y, double theta) {
  return m.likelihood(y, theta);
}

std::string model_digest(const ScalarModel& m) {
  return hex64(fnv1a64(m.label));
}

}  // namespace riskbound
