#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace riskbound {

struct Rng;

using ObsView = std::span<const double>;

enum class SpaceKind { interval, finite };

// Declared support of one scalar coordinate. Interval endpoints may be
// infinite; finite spaces list their points in ascending order.
struct Space {
  SpaceKind kind = SpaceKind::interval;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> points;

  bool contains(double x) const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Scalar-parameter Bayesian model: a prior on theta and a likelihood for the
// observation. Densities are nonnegative and exactly 0 outside the declared
// supports; log-scale companions return -inf wherever the linear density
// falls below 1e-300.
//
// Models observing n > 1 exchangeable coordinates work through their
// sufficient statistic (the sample mean): `likelihood`, the posterior
// helpers, and every integration route take the reduced scalar coordinate,
// which keeps all expectations one-dimensional in y. Density ratios and
// posterior quantities are invariant under that reduction. `joint_density`
// and `conditional_density` also accept the full observation vector.
struct ScalarModel {
  std::string kind;   // catalog tag
  std::string label;  // canonical parameterized name, feeds digests
  Space parameter_space;
  Space observation_space;  // reduced coordinate
  int obs_dim = 1;

  std::function<double(double)> prior;
  std::function<double(double)> log_prior;
  std::function<double(double, double)> likelihood;  // (y, theta), reduced y
  std::function<double(double, double)> log_likelihood;
  std::function<double(ObsView, double)> likelihood_full;

  std::optional<std::function<double(double)>> analytic_posterior_mean;
  std::optional<std::function<double(double, double)>> analytic_score;

  bool theta_discrete = false;
  bool obs_discrete = false;

  // Quadrature geometry. Soft ranges are +-k*sigma boxes that integration
  // may pad; hard ranges are exact supports and must not be widened.
  bool y_support_hard = false;
  bool theta_support_hard_given_y = false;
  std::function<Interval(double /*tail_sigmas*/)> theta_range;
  std::function<Interval(double /*theta*/, double)> y_range_given_theta;
  std::function<Interval(double /*y*/, double)> theta_range_given_y;
  std::function<Interval(double /*tail_sigmas*/)> y_marginal_range;

  // Ancestral sampler over the reduced observation.
  std::function<double(Rng&)> sample_prior;
  std::function<double(double, Rng&)> sample_obs;

  // Sufficient statistic of a full observation (the mean for exchangeable
  // coordinates, the identity for obs_dim == 1).
  double reduce(ObsView y) const;
};

struct GaussianGaussianSpec {
  double var_prior = 1.0;
  double var_noise = 1.0;
  int n_obs = 1;
};

struct DiscreteChannelSpec {
  double flip_prob = 0.1;
};

struct UniformLocationSpec {
  double prior_var = 1.0;
  double width = 1.0;
};

using ModelSpec =
    std::variant<GaussianGaussianSpec, DiscreteChannelSpec, UniformLocationSpec>;

// Builds a catalog model and validates its normalization (prior and
// likelihood integrate/sum to 1 within 1e-8; likelihood probed at 11 theta
// values). Throws InvalidSpec on parameter or normalization failure.
ScalarModel make_model(const ModelSpec& spec);

// Densities over the full observation vector; DomainError when y.size() does
// not match obs_dim.
double joint_density(const ScalarModel& m, ObsView y, double theta);
double conditional_density(const ScalarModel& m, ObsView y, double theta);

// Reduced-coordinate overloads (identical to the above when obs_dim == 1).
double joint_density(const ScalarModel& m, double y, double theta);
double conditional_density(const ScalarModel& m, double y, double theta);

struct Estimator {
  std::function<double(double)> rule;  // reduced observation -> estimate
  std::string label;
};

std::string model_digest(const ScalarModel& m);

}  // namespace riskbound
