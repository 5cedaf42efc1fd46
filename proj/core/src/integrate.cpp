#include "riskbound/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include "riskbound/errors.hpp"
#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

constexpr double kEvidenceFloor = 1e-300;
constexpr long long kMcBlock = 65536;

QuadAxis finite_axis(const Space& s) {
  QuadAxis ax;
  ax.discrete = true;
  ax.nodes = s.points;
  ax.weights.assign(s.points.size(), 1.0);
  return ax;
}

// Panelwise Gauss-Legendre axis over `box`. Soft boxes are widened by
// `pad`; hard boxes keep their exact endpoints and are only subdivided.
QuadAxis interval_axis(Interval box, bool hard, double pad,
                       std::vector<double> breaks, int nodes) {
  if (!hard) {
    box.lo -= pad;
    box.hi += pad;
  }
  if (!std::isfinite(box.lo) || !std::isfinite(box.hi) || !(box.hi > box.lo)) {
    throw DomainError("degenerate integration box");
  }
  const double span = box.hi - box.lo;
  const double tol = 1e-12 * std::max(1.0, span);
  std::sort(breaks.begin(), breaks.end());
  std::vector<double> cuts{box.lo};
  for (double b : breaks) {
    if (b <= box.lo + tol || b >= box.hi - tol) continue;
    if (b - cuts.back() > tol) cuts.push_back(b);
  }
  cuts.push_back(box.hi);

  const GaussLegendreRule& rule = gauss_legendre(nodes);
  QuadAxis ax;
  ax.nodes.reserve(rule.nodes.size() * (cuts.size() - 1));
  ax.weights.reserve(ax.nodes.capacity());
  for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
    const double mid = 0.5 * (cuts[p] + cuts[p + 1]);
    const double half = 0.5 * (cuts[p + 1] - cuts[p]);
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      ax.nodes.push_back(mid + half * rule.nodes[i]);
      ax.weights.push_back(half * rule.weights[i]);
    }
  }
  return ax;
}

// Weighted integrals of several integrands over one axis, sharing nodes.
// Contributions where the weight density vanishes are dropped without
// evaluating the integrand.
std::vector<double> axis_integrals(const QuadAxis& ax,
                                   const std::function<double(double)>& weight,
                                   std::span<const Fn1> fns,
                                   const char* what) {
  const std::size_t n = ax.nodes.size();
  std::vector<std::vector<double>> terms(fns.size(),
                                         std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ax.nodes[i];
    const double p = weight(x);
    if (!std::isfinite(p) || p < 0.0) {
      throw NonFinite(std::string(what) + ": weight density is not finite");
    }
    if (p == 0.0) continue;
    const double wp = ax.weights[i] * p;
    for (std::size_t j = 0; j < fns.size(); ++j) {
      const double t = wp * fns[j](x);
      if (!std::isfinite(t)) {
        throw NonFinite(std::string(what) + ": integrand is not finite");
      }
      terms[j][i] = t;
    }
  }
  std::vector<double> out(fns.size());
  for (std::size_t j = 0; j < fns.size(); ++j) out[j] = pairwise_sum(terms[j]);
  return out;
}

std::vector<double> probe_thetas(const ScalarModel& m) {
  if (m.parameter_space.kind == SpaceKind::finite) {
    return m.parameter_space.points;
  }
  std::vector<double> probes;
  const Interval r = m.theta_range(2.0);
  for (int i = 0; i < 11; ++i) {
    probes.push_back(r.lo + (r.hi - r.lo) * (i + 0.5) / 11.0);
  }
  return probes;
}

}  // namespace

void validate_config(const IntegrationConfig& cfg) {
  if (cfg.nodes_per_axis < 33) {
    throw InvalidSpec("integration.nodes_per_axis must be >= 33");
  }
  if (!(cfg.tail_sigmas >= 4.0) || !std::isfinite(cfg.tail_sigmas)) {
    throw InvalidSpec("integration.tail_sigmas must be finite and >= 4");
  }
  if (cfg.mc_samples < 0) {
    throw InvalidSpec("integration.mc_samples must be >= 0");
  }
  if (cfg.workers < 1) {
    throw InvalidSpec("integration.workers must be >= 1");
  }
}

QuadAxis prior_theta_axis(const ScalarModel& m, const IntegrationConfig& cfg,
                          const QuadHints& hints) {
  validate_config(cfg);
  if (m.parameter_space.kind == SpaceKind::finite) {
    return finite_axis(m.parameter_space);
  }
  return interval_axis(m.theta_range(cfg.tail_sigmas), false, hints.theta_pad,
                       hints.theta_breaks, cfg.nodes_per_axis);
}

QuadAxis marginal_y_axis(const ScalarModel& m, const IntegrationConfig& cfg,
                         const QuadHints& hints) {
  validate_config(cfg);
  if (m.observation_space.kind == SpaceKind::finite) {
    return finite_axis(m.observation_space);
  }
  return interval_axis(m.y_marginal_range(cfg.tail_sigmas), false,
                       hints.y_pad, hints.y_breaks, cfg.nodes_per_axis);
}

QuadAxis y_axis_given_theta(const ScalarModel& m, double theta,
                            const IntegrationConfig& cfg,
                            const QuadHints& hints) {
  validate_config(cfg);
  if (m.observation_space.kind == SpaceKind::finite) {
    return finite_axis(m.observation_space);
  }
  std::vector<double> breaks = hints.y_breaks;
  if (m.y_support_hard) {
    for (double s : hints.theta_shifts) {
      const Interval r = m.y_range_given_theta(theta + s, cfg.tail_sigmas);
      breaks.push_back(r.lo);
      breaks.push_back(r.hi);
    }
  }
  return interval_axis(m.y_range_given_theta(theta, cfg.tail_sigmas),
                       m.y_support_hard, hints.y_pad, std::move(breaks),
                       cfg.nodes_per_axis);
}

QuadAxis theta_axis_given_y(const ScalarModel& m, double y,
                            const IntegrationConfig& cfg,
                            const QuadHints& hints) {
  validate_config(cfg);
  if (m.parameter_space.kind == SpaceKind::finite) {
    return finite_axis(m.parameter_space);
  }
  std::vector<double> breaks = hints.theta_breaks;
  if (m.theta_support_hard_given_y) {
    const Interval r = m.theta_range_given_y(y, cfg.tail_sigmas);
    for (double s : hints.theta_shifts) {
      breaks.push_back(r.lo - s);
      breaks.push_back(r.hi - s);
    }
  }
  return interval_axis(m.theta_range_given_y(y, cfg.tail_sigmas),
                       m.theta_support_hard_given_y, hints.theta_pad,
                       std::move(breaks), cfg.nodes_per_axis);
}

std::vector<double> slice_at_theta(const ScalarModel& m, double theta,
                                   std::span<const Fn1> fns,
                                   const IntegrationConfig& cfg,
                                   const QuadHints& hints) {
  const QuadAxis ax = y_axis_given_theta(m, theta, cfg, hints);
  return axis_integrals(
      ax, [&](double y) { return m.likelihood(y, theta); }, fns,
      "slice_at_theta");
}

std::vector<double> joint_slice_at_y(const ScalarModel& m, double y,
                                     std::span<const Fn1> fns,
                                     const IntegrationConfig& cfg,
                                     const QuadHints& hints) {
  const QuadAxis ax = theta_axis_given_y(m, y, cfg, hints);
  return axis_integrals(
      ax, [&](double t) { return m.prior(t) * m.likelihood(y, t); }, fns,
      "joint_slice_at_y");
}

double evidence(const ScalarModel& m, double y, const IntegrationConfig& cfg,
                const QuadHints& hints) {
  const Fn1 one = [](double) { return 1.0; };
  return joint_slice_at_y(m, y, std::span<const Fn1>(&one, 1), cfg, hints)[0];
}

double expect_given_theta(const ScalarModel& m, const Fn1& f, double theta,
                          const IntegrationConfig& cfg,
                          const QuadHints& hints) {
  return slice_at_theta(m, theta, std::span<const Fn1>(&f, 1), cfg, hints)[0];
}

std::vector<double> expect_given_y_many(const ScalarModel& m, double y,
                                        std::span<const Fn1> fns,
                                        const IntegrationConfig& cfg,
                                        const QuadHints& hints) {
  std::vector<Fn1> all;
  all.reserve(fns.size() + 1);
  all.emplace_back([](double) { return 1.0; });
  for (const Fn1& f : fns) all.push_back(f);
  const std::vector<double> raw = joint_slice_at_y(m, y, all, cfg, hints);
  const double ev = raw[0];
  if (!(ev >= kEvidenceFloor)) {
    throw ZeroEvidence("evidence underflow at y=" + std::to_string(y));
  }
  std::vector<double> out(fns.size());
  for (std::size_t j = 0; j < fns.size(); ++j) out[j] = raw[j + 1] / ev;
  return out;
}

double expect_given_y(const ScalarModel& m, const Fn1& f, double y,
                      const IntegrationConfig& cfg, const QuadHints& hints) {
  return expect_given_y_many(m, y, std::span<const Fn1>(&f, 1), cfg,
                             hints)[0];
}

std::vector<double> expect_joint_many(const ScalarModel& m,
                                      std::span<const Fn2> fns,
                                      const IntegrationConfig& cfg,
                                      const QuadHints& hints) {
  validate_config(cfg);
  const QuadAxis outer = prior_theta_axis(m, cfg, hints);
  const std::size_t n = outer.nodes.size();
  std::vector<std::vector<double>> contrib(fns.size(),
                                           std::vector<double>(n, 0.0));
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    const double theta = outer.nodes[i];
    const double pr = m.prior(theta);
    if (!std::isfinite(pr) || pr < 0.0) {
      throw NonFinite("expect_joint: prior density is not finite");
    }
    if (pr == 0.0) return;
    std::vector<Fn1> inner;
    inner.reserve(fns.size());
    for (const Fn2& f : fns) {
      const Fn2* fp = &f;
      inner.emplace_back([fp, theta](double y) { return (*fp)(y, theta); });
    }
    const std::vector<double> sl = slice_at_theta(m, theta, inner, cfg, hints);
    for (std::size_t j = 0; j < fns.size(); ++j) {
      contrib[j][i] = outer.weights[i] * pr * sl[j];
    }
  });
  std::vector<double> out(fns.size());
  for (std::size_t j = 0; j < fns.size(); ++j) {
    out[j] = pairwise_sum(contrib[j]);
  }
  return out;
}

double expect_joint(const ScalarModel& m, const Fn2& f,
                    const IntegrationConfig& cfg, const QuadHints& hints) {
  return expect_joint_many(m, std::span<const Fn2>(&f, 1), cfg, hints)[0];
}

double posterior_mean(const ScalarModel& m, double y,
                      const IntegrationConfig& cfg) {
  if (m.analytic_posterior_mean) return (*m.analytic_posterior_mean)(y);
  return expect_given_y(m, [](double t) { return t; }, y, cfg);
}

std::function<double(double)> make_posterior_mean_memo(
    const ScalarModel& m, const IntegrationConfig& cfg) {
  if (m.analytic_posterior_mean) return *m.analytic_posterior_mean;
  struct Cache {
    std::mutex mu;
    std::unordered_map<std::uint64_t, double> values;
  };
  auto cache = std::make_shared<Cache>();
  return [&m, cfg, cache](double y) {
    std::uint64_t key;
    static_assert(sizeof(key) == sizeof(y));
    std::memcpy(&key, &y, sizeof(key));
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      auto it = cache->values.find(key);
      if (it != cache->values.end()) return it->second;
    }
    const double mu = posterior_mean(m, y, cfg);
    std::lock_guard<std::mutex> lock(cache->mu);
    cache->values.emplace(key, mu);
    return mu;
  };
}

McResult mc_expect_joint(const ScalarModel& m, const Fn2& f,
                         long long samples, std::uint64_t seed, int workers) {
  if (samples < 1000) {
    throw InvalidSpec("mc_expect_joint requires samples >= 1000");
  }
  if (!m.sample_prior || !m.sample_obs) {
    throw UnsupportedSampling("model '" + m.label + "' carries no sampler");
  }
  const long long n = samples;
  const std::size_t blocks =
      static_cast<std::size_t>((n + kMcBlock - 1) / kMcBlock);
  std::vector<double> sums(blocks, 0.0);
  std::vector<double> sq_sums(blocks, 0.0);
  parallel_for(blocks, std::max(1, workers), [&](std::size_t b) {
    Rng rng(derive_subseed(seed, b));
    const long long lo = static_cast<long long>(b) * kMcBlock;
    const long long count = std::min(kMcBlock, n - lo);
    std::vector<double> vals(static_cast<std::size_t>(count));
    std::vector<double> sqs(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      const double theta = m.sample_prior(rng);
      const double y = m.sample_obs(theta, rng);
      const double v = f(y, theta);
      if (!std::isfinite(v)) {
        throw NonFinite("mc_expect_joint: integrand is not finite");
      }
      vals[static_cast<std::size_t>(i)] = v;
      sqs[static_cast<std::size_t>(i)] = v * v;
    }
    sums[b] = pairwise_sum(vals);
    sq_sums[b] = pairwise_sum(sqs);
  });
  McResult r;
  r.samples = n;
  r.mean = pairwise_sum(sums) / static_cast<double>(n);
  const double m2 = pairwise_sum(sq_sums) / static_cast<double>(n);
  const double var = std::max(0.0, m2 - r.mean * r.mean);
  r.std_error = std::sqrt(var / static_cast<double>(n));
  return r;
}

double prior_mass(const ScalarModel& m, const IntegrationConfig& cfg) {
  const QuadAxis ax = prior_theta_axis(m, cfg);
  const Fn1 one = [](double) { return 1.0; };
  return axis_integrals(
      ax, [&](double t) { return m.prior(t); },
      std::span<const Fn1>(&one, 1), "prior_mass")[0];
}

double likelihood_mass(const ScalarModel& m, double theta,
                       const IntegrationConfig& cfg) {
  const Fn1 one = [](double) { return 1.0; };
  return slice_at_theta(m, theta, std::span<const Fn1>(&one, 1), cfg)[0];
}

void validate_model(const ScalarModel& m, const IntegrationConfig& cfg) {
  const double pm = prior_mass(m, cfg);
  if (std::abs(pm - 1.0) > 1e-8) {
    throw InvalidSpec("model '" + m.label + "': prior mass " +
                      std::to_string(pm) + " is not 1 within 1e-8");
  }
  for (double theta : probe_thetas(m)) {
    const double lm = likelihood_mass(m, theta, cfg);
    if (std::abs(lm - 1.0) > 1e-8) {
      throw InvalidSpec("model '" + m.label + "': likelihood mass " +
                        std::to_string(lm) + " at theta=" +
                        std::to_string(theta) + " is not 1 within 1e-8");
    }
  }
}

}  // namespace riskbound
