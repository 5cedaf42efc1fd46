#include "riskbound/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riskbound/errors.hpp"
#include "riskbound/numeric.hpp"

namespace riskbound {

namespace {

constexpr int kSeedPerAxis = 9;
constexpr int kMaxEvaluations = 200;
constexpr double kRelWidth = 1e-4;
const double kGolden = 0.5 * (std::sqrt(5.0) - 1.0);

void validate_family_flavor(PsiFamily family, BoundFlavor flavor) {
  if (family != PsiFamily::ww && family != PsiFamily::cond) {
    throw InvalidSpec("family must be ww or cond");
  }
  switch (flavor) {
    case BoundFlavor::global:
    case BoundFlavor::avg_conditional:
    case BoundFlavor::avg_theta:
      return;
    case BoundFlavor::ww:
      if (family != PsiFamily::ww) {
        throw InvalidSpec("the ww flavor requires the ww family");
      }
      return;
    default:
      throw InvalidSpec("flavor '" + to_string(flavor) +
                        "' is not sweepable over (h, s)");
  }
}

BoundResult eval_bound(const ScalarModel& m, PsiFamily family,
                       BoundFlavor flavor, double h, double s,
                       const IntegrationConfig& cfg) {
  if (flavor == BoundFlavor::ww) return bound_ww(m, h, s, cfg);
  PsiSpec spec;
  spec.family = family;
  spec.h = h;
  spec.s = s;
  switch (flavor) {
    case BoundFlavor::global:
      return bound_global(m, spec, cfg);
    case BoundFlavor::avg_conditional:
      return bound_avg_conditional(m, spec, cfg);
    case BoundFlavor::avg_theta:
      return bound_avg_theta(m, spec, cfg);
    default:
      throw InvalidSpec("flavor '" + to_string(flavor) +
                        "' is not sweepable over (h, s)");
  }
}

SweepRow eval_row(const ScalarModel& m, PsiFamily family, BoundFlavor flavor,
                  double h, double s, const IntegrationConfig& cfg) {
  SweepRow row;
  row.h = h;
  row.s = s;
  row.flavor = flavor;
  try {
    const BoundResult r = eval_bound(m, family, flavor, h, s, cfg);
    row.status = r.status;
    row.value = r.value;
    row.numerator = r.numerator;
    row.denominator = r.denominator;
  } catch (const InvalidSpec&) {
    row.status = BoundStatus::unsupported;
  } catch (const ConditionViolated&) {
    row.status = BoundStatus::unsupported;
  } catch (const ZeroEvidence&) {
    row.status = BoundStatus::unsupported;
  } catch (const NonFinite&) {
    row.status = BoundStatus::unsupported;
  } catch (const DomainError&) {
    row.status = BoundStatus::unsupported;
  }
  return row;
}

std::vector<double> linspace(Interval r, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0
                                : static_cast<double>(i) /
                                      static_cast<double>(count - 1);
    out[i] = r.lo + t * (r.hi - r.lo);
  }
  return out;
}

struct Best {
  double h = 0.0;
  double s = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  bool found = false;

  // Strictly better value wins; exact ties prefer smaller |h|, then smaller s.
  void offer(double h_, double s_, double value_) {
    if (!found || value_ > value ||
        (value_ == value && (std::abs(h_) < std::abs(h) ||
                             (std::abs(h_) == std::abs(h) && s_ < s)))) {
      h = h_;
      s = s_;
      value = value_;
      found = true;
    }
  }
};

}  // namespace

std::string integration_digest(const IntegrationConfig& cfg) {
  const std::string text =
      "nodes=" + std::to_string(cfg.nodes_per_axis) +
      ";tail=" + format_sig(cfg.tail_sigmas, 17) +
      ";mc=" + std::to_string(cfg.mc_samples) +
      ";seed=" + std::to_string(cfg.seed);
  return hex64(fnv1a64(text));
}

SweepTable sweep(const ScalarModel& m, PsiFamily family, BoundFlavor flavor,
                 const std::vector<double>& h_grid,
                 const std::vector<double>& s_grid,
                 const IntegrationConfig& cfg) {
  validate_config(cfg);
  validate_family_flavor(family, flavor);
  if (h_grid.empty() || s_grid.empty()) {
    throw InvalidSpec("sweep grids must be nonempty");
  }
  for (double h : h_grid) {
    if (!std::isfinite(h) || h == 0.0) {
      throw InvalidSpec("h grid values must be finite and nonzero");
    }
  }
  for (double s : s_grid) {
    if (!(s > 0.0) || s > 1.0) {
      throw InvalidSpec("s grid values must lie in (0, 1]");
    }
  }

  std::vector<double> hs = h_grid;
  std::vector<double> ss = s_grid;
  std::sort(hs.begin(), hs.end());
  std::sort(ss.begin(), ss.end());

  SweepTable table;
  table.model_digest = model_digest(m);
  table.cfg_digest = integration_digest(cfg);
  table.rows.resize(hs.size() * ss.size());

  IntegrationConfig inner = cfg;
  inner.workers = 1;
  parallel_for(table.rows.size(), cfg.workers, [&](std::size_t i) {
    const double h = hs[i / ss.size()];
    const double s = ss[i % ss.size()];
    table.rows[i] = eval_row(m, family, flavor, h, s, inner);
  });
  return table;
}

Optimum maximize(const ScalarModel& m, PsiFamily family, BoundFlavor flavor,
                 Interval h_range, Interval s_range,
                 const IntegrationConfig& cfg) {
  validate_config(cfg);
  validate_family_flavor(family, flavor);
  if (!(h_range.lo < h_range.hi) || !std::isfinite(h_range.lo) ||
      !std::isfinite(h_range.hi)) {
    throw InvalidSpec("h_range must be a finite nonempty interval");
  }
  if (!(s_range.lo < s_range.hi) || !(s_range.lo > 0.0) || s_range.hi > 1.0) {
    throw InvalidSpec("s_range must be a nonempty subinterval of (0, 1]");
  }

  int evaluations = 0;
  Best best;
  auto probe = [&](double h, double s) {
    ++evaluations;
    double v = -std::numeric_limits<double>::infinity();
    try {
      const BoundResult r = eval_bound(m, family, flavor, h, s, cfg);
      if (r.status == BoundStatus::ok) v = *r.value;
    } catch (const InvalidSpec&) {
    } catch (const ConditionViolated&) {
    } catch (const ZeroEvidence&) {
    } catch (const NonFinite&) {
    } catch (const DomainError&) {
    }
    if (std::isfinite(v)) best.offer(h, s, v);
    return v;
  };

  std::vector<double> h_seeds = linspace(h_range, kSeedPerAxis);
  if (m.parameter_space.kind == SpaceKind::finite) {
    const std::vector<double>& pts = m.parameter_space.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (i == j) continue;
        const double d = pts[i] - pts[j];
        if (d >= h_range.lo && d <= h_range.hi && d != 0.0) {
          h_seeds.push_back(d);
        }
      }
    }
    std::sort(h_seeds.begin(), h_seeds.end());
    h_seeds.erase(std::unique(h_seeds.begin(), h_seeds.end()), h_seeds.end());
  }
  const std::vector<double> s_seeds = linspace(s_range, kSeedPerAxis);

  for (double h : h_seeds) {
    for (double s : s_seeds) {
      probe(h, s);
    }
  }
  if (!best.found) {
    throw AllDegenerate("every seed point evaluated to a non-ok status");
  }

  // One golden-section pass over a single coordinate, bracketing one seed
  // spacing around the incumbent. Returns the final bracket width.
  auto golden_pass = [&](bool on_h) {
    const Interval range = on_h ? h_range : s_range;
    const double span = range.hi - range.lo;
    const double step = span / static_cast<double>(kSeedPerAxis - 1);
    const double center = on_h ? best.h : best.s;
    double a = std::max(range.lo, center - step);
    double b = std::min(range.hi, center + step);
    double x1 = b - kGolden * (b - a);
    double x2 = a + kGolden * (b - a);
    double f1 = on_h ? probe(x1, best.s) : probe(best.h, x1);
    double f2 = on_h ? probe(x2, best.s) : probe(best.h, x2);
    while (b - a > kRelWidth * span && evaluations < kMaxEvaluations) {
      if (f1 < f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kGolden * (b - a);
        f2 = on_h ? probe(x2, best.s) : probe(best.h, x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kGolden * (b - a);
        f1 = on_h ? probe(x1, best.s) : probe(best.h, x1);
      }
    }
    return b - a;
  };

  double width_h = h_range.hi - h_range.lo;
  double width_s = s_range.hi - s_range.lo;
  while (evaluations < kMaxEvaluations) {
    width_h = golden_pass(true);
    width_s = golden_pass(false);
    if (width_h <= kRelWidth * (h_range.hi - h_range.lo) &&
        width_s <= kRelWidth * (s_range.hi - s_range.lo)) {
      break;
    }
  }

  Optimum out;
  out.h_star = best.h;
  out.s_star = best.s;
  out.value = best.value;
  out.evaluations = evaluations;
  out.converged = width_h <= kRelWidth * (h_range.hi - h_range.lo) &&
                  width_s <= kRelWidth * (s_range.hi - s_range.lo);
  return out;
}

}  // namespace riskbound
