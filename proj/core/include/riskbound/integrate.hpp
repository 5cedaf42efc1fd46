#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "riskbound/model.hpp"

namespace riskbound {

struct IntegrationConfig {
  int nodes_per_axis = 257;  // >= 33
  double tail_sigmas = 8.0;  // >= 4
  long long mc_samples = 0;  // 0 = quadrature only
  std::uint64_t seed = 1;
  int workers = 1;
};

// Throws InvalidSpec on out-of-range fields.
void validate_config(const IntegrationConfig& cfg);

// Extra quadrature geometry injected by integrands that evaluate densities
// at shifted parameter values (test functions do). Soft axis boxes are
// widened by the pads; `theta_shifts` lists the shifts themselves so axes
// over hard supports can be split exactly where a shifted density turns on
// or off.
struct QuadHints {
  double theta_pad = 0.0;
  double y_pad = 0.0;
  std::vector<double> theta_shifts;
  std::vector<double> theta_breaks;
  std::vector<double> y_breaks;
};

// One quadrature axis. For interval coordinates the weights are panelwise
// Gauss-Legendre weights; for finite coordinates the nodes are the support
// points and every weight is 1 (summation semantics).
struct QuadAxis {
  std::vector<double> nodes;
  std::vector<double> weights;
  bool discrete = false;
};

QuadAxis prior_theta_axis(const ScalarModel& m, const IntegrationConfig& cfg,
                          const QuadHints& hints = {});
QuadAxis marginal_y_axis(const ScalarModel& m, const IntegrationConfig& cfg,
                         const QuadHints& hints = {});
QuadAxis y_axis_given_theta(const ScalarModel& m, double theta,
                            const IntegrationConfig& cfg,
                            const QuadHints& hints = {});
QuadAxis theta_axis_given_y(const ScalarModel& m, double y,
                            const IntegrationConfig& cfg,
                            const QuadHints& hints = {});

using Fn1 = std::function<double(double)>;
// Joint integrands take (y, theta) in the reduced observation coordinate.
using Fn2 = std::function<double(double, double)>;

// Element i is the likelihood-weighted integral of fns[i] over y at fixed
// theta (no prior factor). All integrands share one set of nodes.
std::vector<double> slice_at_theta(const ScalarModel& m, double theta,
                                   std::span<const Fn1> fns,
                                   const IntegrationConfig& cfg,
                                   const QuadHints& hints = {});

// Element i is the unnormalized posterior integral of fns[i] over theta at
// fixed y (prior times likelihood weight). Dividing by the f == 1 entry
// normalizes.
std::vector<double> joint_slice_at_y(const ScalarModel& m, double y,
                                     std::span<const Fn1> fns,
                                     const IntegrationConfig& cfg,
                                     const QuadHints& hints = {});

// Marginal observation density at y.
double evidence(const ScalarModel& m, double y, const IntegrationConfig& cfg,
                const QuadHints& hints = {});

double expect_given_theta(const ScalarModel& m, const Fn1& f, double theta,
                          const IntegrationConfig& cfg,
                          const QuadHints& hints = {});

// Posterior expectation; throws ZeroEvidence when the evidence at y falls
// below 1e-300.
double expect_given_y(const ScalarModel& m, const Fn1& f, double y,
                      const IntegrationConfig& cfg,
                      const QuadHints& hints = {});
std::vector<double> expect_given_y_many(const ScalarModel& m, double y,
                                        std::span<const Fn1> fns,
                                        const IntegrationConfig& cfg,
                                        const QuadHints& hints = {});

double expect_joint(const ScalarModel& m, const Fn2& f,
                    const IntegrationConfig& cfg, const QuadHints& hints = {});
std::vector<double> expect_joint_many(const ScalarModel& m,
                                      std::span<const Fn2> fns,
                                      const IntegrationConfig& cfg,
                                      const QuadHints& hints = {});

// Analytic rule when the model carries one, posterior quadrature otherwise.
double posterior_mean(const ScalarModel& m, double y,
                      const IntegrationConfig& cfg);

// Memoizing posterior-mean evaluator (analytic rules bypass the cache).
// Safe for concurrent calls; the model must outlive the returned function.
std::function<double(double)> make_posterior_mean_memo(
    const ScalarModel& m, const IntegrationConfig& cfg);

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  long long samples = 0;
};

// Plain Monte Carlo over ancestral draws (samples >= 1000). Work is split
// into fixed blocks of 65536 draws, each driven by a counter-derived
// subseed and combined in block order, so the result is bit-identical for
// any worker count. Throws UnsupportedSampling when the model carries no
// sampler.
McResult mc_expect_joint(const ScalarModel& m, const Fn2& f,
                         long long samples, std::uint64_t seed,
                         int workers = 1);

double prior_mass(const ScalarModel& m, const IntegrationConfig& cfg);
double likelihood_mass(const ScalarModel& m, double theta,
                       const IntegrationConfig& cfg);

// Re-checks normalization at the configured resolution; InvalidSpec on
// failure.
void validate_model(const ScalarModel& m, const IntegrationConfig& cfg);

}  // namespace riskbound
