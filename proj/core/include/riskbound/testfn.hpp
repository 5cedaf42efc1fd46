#pragma once

#include <functional>
#include <string>
#include <vector>

#include "riskbound/integrate.hpp"
#include "riskbound/model.hpp"

namespace riskbound {

// Families of test functions inserted into the Cauchy-Schwarz machinery:
//   ww      joint-density ratio pair with shift h and exponent s
//   cond    the same construction on the conditional density p(y|.) only
//   optimal theta - posterior_mean(y), which attains equality
//   custom  caller-supplied evaluator
enum class PsiFamily { ww, cond, optimal, custom };

std::string to_string(PsiFamily family);
PsiFamily psi_family_from_string(const std::string& text);

struct PsiSpec {
  PsiFamily family = PsiFamily::ww;
  double h = 1.0;  // nonzero; ww and cond only
  double s = 0.5;  // in (0, 1]; ww and cond only
  std::function<double(double, double)> custom_fn;  // (y, theta)
};

// InvalidSpec on h = 0, s outside (0, 1], or a custom family without an
// evaluator.
void validate_psi_spec(const PsiSpec& spec);

// A bound-ready test function: evaluator plus the quadrature geometry its
// shifted density evaluations require.
struct Psi {
  Fn2 eval;  // (y, theta)
  QuadHints hints;
  std::string label;
  // True when the construction forces E[psi|y] = 0 for every y.
  bool zero_mean_given_y = false;
};

Psi make_psi(const ScalarModel& m, const PsiSpec& spec,
             const IntegrationConfig& cfg);

// One-off evaluation. For family optimal this computes the posterior mean
// at y (ZeroEvidence propagates).
double eval_psi(const PsiSpec& spec, const ScalarModel& m, double y,
                double theta, const IntegrationConfig& cfg);

// Quadrature hints alone (pads and shifts for ww/cond, empty otherwise).
QuadHints psi_quad_hints(const ScalarModel& m, const PsiSpec& spec);

struct ConditionReport {
  double max_abs_dev = 0.0;
  double worst_y = 0.0;
  bool pass = false;  // max_abs_dev <= 1e-8
};

// Max over probes of |E[psi|y]|; the flag passes at tolerance 1e-8.
ConditionReport check_zero_condition(const ScalarModel& m,
                                     const PsiSpec& spec,
                                     const std::vector<double>& y_probes,
                                     const IntegrationConfig& cfg);

// Finite observation spaces probe every point; interval spaces probe 21
// evenly spaced observations across the central 3-sigma marginal range.
std::vector<double> default_y_probes(const ScalarModel& m,
                                     const IntegrationConfig& cfg);

}  // namespace riskbound
