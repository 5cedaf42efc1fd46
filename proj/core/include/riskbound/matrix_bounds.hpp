#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "riskbound/bounds.hpp"
#include "riskbound/integrate.hpp"
#include "riskbound/model.hpp"

namespace riskbound {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Vector-parameter Bayesian model with a vector-valued estimation target
// g(theta). Densities follow the ScalarModel conventions (exact zeros
// outside supports, -inf log densities below 1e-300). Quadrature boxes are
// per-axis intervals at k tail sigmas; the v1 catalog is jointly Gaussian,
// so every box is soft.
struct VectorModel {
  int parameter_dim = 1;    // p
  int observation_dim = 1;  // m
  int target_dim = 1;       // q
  std::string label;

  std::function<double(const Vec&)> prior;
  std::function<double(const Vec&)> log_prior;
  std::function<double(const Vec&, const Vec&)> likelihood;  // (y, theta)
  std::function<double(const Vec&, const Vec&)> log_likelihood;
  std::function<Vec(const Vec&)> target;  // g(theta), dim q

  std::optional<std::function<Vec(const Vec&)>> analytic_posterior_mean_g;

  std::function<Interval(int /*axis*/, double /*k*/)> theta_range;
  std::function<Interval(int, const Vec& /*theta*/, double)> y_range_given_theta;
  std::function<Interval(int, const Vec& /*y*/, double)> theta_range_given_y;
  std::function<Interval(int, double)> y_marginal_range;
};

// theta ~ Normal(0, prior_cov), y = H theta + noise, noise ~ Normal(0,
// noise_cov), g(theta) = theta. Carries the analytic posterior mean
// gain * y with gain = post_cov H^T noise_cov^-1. Throws NotSPD unless both
// covariances are symmetric positive definite.
VectorModel make_linear_gaussian_vector_model(const Mat& H,
                                              const Mat& prior_cov,
                                              const Mat& noise_cov);

enum class MatrixBoundStatus { ok, singular_psi_cov, non_psd_input };

std::string to_string(MatrixBoundStatus status);

// One coordinate of a stacked test function: the two-sided density-ratio
// form with the parameter shifted by +-h along one theta axis.
struct WwComponent {
  int axis = 0;
  double h = 1.0;
  double s = 0.5;
};

enum class VectorPsiKind { stacked_ww, optimal, custom };

// Vector test function of dimension r. stacked_ww stacks one density-ratio
// coordinate per component (r = components.size()); optimal is
// g(theta) - E[g|y] (r = q); custom supplies the map directly.
struct VectorPsiSpec {
  VectorPsiKind kind = VectorPsiKind::stacked_ww;
  std::vector<WwComponent> components;
  int custom_dim = 0;
  std::function<Vec(const Vec& /*y*/, const Vec& /*theta*/)> custom_fn;
};

int psi_dim(const VectorModel& m, const VectorPsiSpec& spec);

// Throws InvalidSpec on empty stacks, out-of-range axes, h = 0, or s
// outside (0, 1].
void validate_vector_psi_spec(const VectorModel& m, const VectorPsiSpec& spec);

// Matrix lower bound on the q x q error-moment matrix of the posterior-mean
// estimator. bound_matrix is meaningful only when status == ok; it is
// symmetrized to 1e-12 and PSD within a -1e-10 eigenvalue tolerance.
// cross_matrix and psi_cov record the (outer-averaged, for averaged flavors)
// cross moment E[(g - E[g|y]) Psi^T] and the flavor's Psi covariance or
// second-moment matrix.
struct MatrixBoundResult {
  BoundFlavor flavor = BoundFlavor::global;
  MatrixBoundStatus status = MatrixBoundStatus::ok;
  Mat bound_matrix;
  Mat cross_matrix;
  Mat psi_cov;
};

// Flavors: global, conditional (requires y), avg_conditional, avg_theta.
// The denominator matrix mirrors the scalar flavors: covariance for the
// first three, the conditional second moment E[Psi Psi^T | theta] for
// avg_theta. Inversion is Cholesky behind a condition-number guard of 1e12;
// an ill-conditioned or indefinite matrix yields singular_psi_cov or
// non_psd_input instead of a value. For averaged flavors a failing inner
// node only degrades the status when its outer mass exceeds 1e-12.
MatrixBoundResult mat_bound(const VectorModel& m, const VectorPsiSpec& spec,
                            BoundFlavor flavor, const IntegrationConfig& cfg,
                            const std::optional<Vec>& y = std::nullopt);

// E[(g(theta) - estimate(y)) (g(theta) - estimate(y))^T], symmetrized.
Mat mse_matrix_exact(const VectorModel& m,
                     const std::function<Vec(const Vec&)>& estimate,
                     const IntegrationConfig& cfg);

// E[g | y]: the analytic map when the model carries one, quadrature
// otherwise. Throws ZeroEvidence when the marginal density underflows at y.
Vec posterior_mean_g(const VectorModel& m, const Vec& y,
                     const IntegrationConfig& cfg);

struct LoewnerReport {
  bool holds = false;
  double min_eigenvalue = 0.0;
};

// holds iff lambda_min(A - B) >= -tol. Throws NotSymmetric unless both
// inputs are symmetric to 1e-10.
LoewnerReport check_loewner(const Mat& A, const Mat& B, double tol);

std::string model_digest(const VectorModel& m);

}  // namespace riskbound
