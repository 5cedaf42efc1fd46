#pragma once

#include <stdexcept>
#include <string>

namespace riskbound {

// Model or test-function parameters outside their admissible ranges.
struct InvalidSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Observation with the wrong dimension for the model.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An integrand produced NaN or +-inf at a quadrature node.
struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Marginal density below the representable cutoff (1e-300); no posterior exists
// numerically at that observation.
struct ZeroEvidence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Monte Carlo requested on a model without an ancestral sampler.
struct UnsupportedSampling : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The conditional-centering identity required by the shortcut bound failed at
// a probe point.
struct ConditionViolated : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every point of an optimizer seed grid evaluated to a non-ok status.
struct AllDegenerate : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Matrix expected to be symmetric positive definite is not.
struct NotSPD : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotSymmetric : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation requires a model with an analytic score.
struct NonRegularModel : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// CLI configuration rejection; `key` names the offending field (dotted path).
struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(std::string key_, const std::string& message)
      : std::runtime_error(message), key(std::move(key_)) {}
};

}  // namespace riskbound
