#pragma once

#include <optional>
#include <string>
#include <vector>

#include "riskbound/bounds.hpp"
#include "riskbound/integrate.hpp"
#include "riskbound/model.hpp"
#include "riskbound/testfn.hpp"

namespace riskbound {

struct SweepRow {
  double h = 0.0;
  double s = 0.0;
  BoundFlavor flavor = BoundFlavor::global;
  BoundStatus status = BoundStatus::unsupported;
  std::optional<double> value;
  std::optional<double> numerator;
  std::optional<double> denominator;
};

// Grid evaluation of one bound flavor over (h, s). Rows are sorted by
// (h, s); the digests identify the model and the integration settings that
// produced the table (worker count excluded, it cannot change values).
struct SweepTable {
  std::vector<SweepRow> rows;
  std::string model_digest;
  std::string cfg_digest;
};

// Families: ww, cond. Flavors: global, avg_conditional, avg_theta, or ww
// (the cross-moment shortcut; requires the ww family). Grid points that fail
// to evaluate become rows with a non-ok status; the sweep itself never
// throws past validation. Rows evaluate in parallel, each internally serial,
// so the table is identical for any worker count.
SweepTable sweep(const ScalarModel& m, PsiFamily family, BoundFlavor flavor,
                 const std::vector<double>& h_grid,
                 const std::vector<double>& s_grid,
                 const IntegrationConfig& cfg);

struct Optimum {
  double h_star = 0.0;
  double s_star = 0.0;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Maximizes the configured bound over (h, s) in the given ranges: a 9 x 9
// seed grid (plus, for finite parameter spaces, every pairwise support-point
// difference as an h seed) followed by alternating golden-section passes in
// h and s around the incumbent. Stops when both coordinate brackets shrink
// below 1e-4 of their range spans (converged = true) or after 200 bound
// evaluations (converged = false). value is the best evaluation seen, so it
// never falls below the best seed; exact ties prefer smaller |h|, then
// smaller s. Throws AllDegenerate when no seed evaluates to status ok.
Optimum maximize(const ScalarModel& m, PsiFamily family, BoundFlavor flavor,
                 Interval h_range, Interval s_range,
                 const IntegrationConfig& cfg);

// Digest of the value-relevant integration settings (workers excluded).
std::string integration_digest(const IntegrationConfig& cfg);

}  // namespace riskbound
