#include <doctest.h>

#include <cmath>
#include <riskbound/bounds.hpp>
#include <riskbound/errors.hpp>
#include <riskbound/model.hpp>

#include "support/enum_oracle.hpp"
#include "support/simple_quad.hpp"

using namespace riskbound;

namespace {

IntegrationConfig cfg_n(int nodes) {
  IntegrationConfig cfg;
  cfg.nodes_per_axis = nodes;
  return cfg;
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
double Phi(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }

// closed forms for the gaussian pair: with J = 1/var_prior + n/var_noise,
//   E[theta psi]  = -h exp(-s(1-s) h^2 J / 2)
//   E[psi^2]      = e1 + e2 - 2 e3 (power-mix integrals of shifted normals)
struct GgWwOracle {
  double J;
  double num(double h, double s) const {
    const double a = std::exp(-s * (1.0 - s) * h * h * J / 2.0);
    return h * h * a * a;
  }
  double den(double h, double s) const {
    const double e1 = std::exp(-s * (1.0 - 2.0 * s) * h * h * J);
    const double e2 = std::exp(-(1.0 - s) * (2.0 * s - 1.0) * h * h * J);
    const double e3 = std::exp(-2.0 * s * (1.0 - s) * h * h * J);
    return e1 + e2 - 2.0 * e3;
  }
};

}  // namespace

TEST_CASE("exact risk: gaussian closed form") {
  const IntegrationConfig cfg = cfg_n(129);
  struct Case {
    double vp, vn;
    int n;
  } cases[] = {{1.0, 1.0, 1}, {2.0, 0.5, 1}, {1.0, 1.0, 10}, {0.3, 2.0, 4}};
  for (const Case& c : cases) {
    const ScalarModel m = make_model(GaussianGaussianSpec{c.vp, c.vn, c.n});
    const BoundResult r = bayes_risk_exact(m, cfg);
    REQUIRE(r.status == BoundStatus::ok);
    const double expect = c.vp * c.vn / (c.n * c.vp + c.vn);
    CHECK(*r.value == doctest::Approx(expect).epsilon(1e-10));
    CHECK(r.flavor == BoundFlavor::exact_risk);
  }
}

TEST_CASE("exact risk: two-point channel enumeration") {
  const ScalarModel m = make_model(DiscreteChannelSpec{0.2});
  const BoundResult r = bayes_risk_exact(m, cfg_n(65));
  const enum_oracle::Channel oracle{0.2};
  CHECK(*r.value == doctest::Approx(oracle.bayes_risk()).epsilon(1e-14));
  CHECK(*r.value == doctest::Approx(0.64).epsilon(1e-14));
}

TEST_CASE("exact risk: uniform window against an erf reduction") {
  const ScalarModel m = make_model(UniformLocationSpec{1.0, 1.0});
  const BoundResult r = bayes_risk_exact(m, cfg_n(129));
  // risk = E[theta^2] - E[mu(y)^2] where mu has the truncated-normal form
  const double drop = simple_quad::simpson(
      [](double y) {
        const double den = Phi(y + 0.5) - Phi(y - 0.5);
        if (den < 1e-300) return 0.0;
        const double num = phi(y - 0.5) - phi(y + 0.5);
        return num * num / den;
      },
      -12.0, 12.0, 20000);
  CHECK(*r.value == doctest::Approx(1.0 - drop).epsilon(1e-9));
}

TEST_CASE("estimator risk dominates the exact risk") {
  const IntegrationConfig cfg = cfg_n(129);
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  const double risk = *bayes_risk_exact(m, cfg).value;
  const Estimator ests[] = {
      {[](double) { return 0.0; }, "zero"},
      {[](double y) { return y; }, "identity"},
      {[](double y) { return 0.5 * y; }, "posterior mean"},
  };
  for (const Estimator& e : ests) {
    CHECK(mse_of_estimator(m, e, cfg) >= risk - 1e-10);
  }
  // the posterior mean attains it
  CHECK(mse_of_estimator(m, ests[2], cfg) ==
        doctest::Approx(risk).epsilon(1e-10));
}

TEST_CASE("two-point channel: every ratio flavor matches enumeration") {
  const ScalarModel m = make_model(DiscreteChannelSpec{0.2});
  const IntegrationConfig cfg = cfg_n(65);
  const enum_oracle::Channel oracle{0.2};

  for (double h : {1.0, 2.0}) {
    for (double s : {0.3, 0.5, 0.7}) {
      const enum_oracle::Channel::Moments mom = oracle.psi_moments(h, s);
      const BoundResult ww = bound_ww(m, h, s, cfg);
      if (mom.psi_sq < 1e-14) {
        CHECK(ww.status == BoundStatus::degenerate_denominator);
        continue;
      }
      REQUIRE(ww.status == BoundStatus::ok);
      CHECK(*ww.value == doctest::Approx(mom.t_psi * mom.t_psi / mom.psi_sq)
                             .epsilon(1e-12));

      // global flavor subtracts the posterior mean and divides by variance
      PsiSpec spec;
      spec.family = PsiFamily::ww;
      spec.h = h;
      spec.s = s;
      double cross = 0.0;
      for (double y : {-1.0, 1.0}) {
        for (double t : {-1.0, 1.0}) {
          cross += oracle.joint(y, t) * (t - oracle.posterior_mean(y)) *
                   oracle.psi(y, t, h, s);
        }
      }
      const double var = mom.psi_sq - mom.psi_mean * mom.psi_mean;
      const BoundResult gl = bound_global(m, spec, cfg);
      REQUIRE(gl.status == BoundStatus::ok);
      CHECK(*gl.value ==
            doctest::Approx(cross * cross / var).epsilon(1e-12));
    }
  }
}

TEST_CASE("two-point channel: the (2, 1/2) evaluation is exact") {
  const ScalarModel m = make_model(DiscreteChannelSpec{0.2});
  const BoundResult r = bound_ww(m, 2.0, 0.5, cfg_n(65));
  REQUIRE(r.status == BoundStatus::ok);
  CHECK(*r.value == doctest::Approx(0.64).epsilon(1e-13));
  CHECK(*r.numerator == doctest::Approx(0.64).epsilon(1e-13));
  CHECK(*r.denominator == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("gaussian pair: ratio moments match the power-mix closed forms") {
  const IntegrationConfig cfg = cfg_n(129);
  struct Case {
    double vp, vn;
    int n;
  } cases[] = {{1.0, 1.0, 1}, {2.0, 0.5, 1}, {1.0, 1.0, 4}};
  for (const Case& c : cases) {
    const ScalarModel m = make_model(GaussianGaussianSpec{c.vp, c.vn, c.n});
    const GgWwOracle oracle{1.0 / c.vp + c.n / c.vn};
    for (double h : {0.25, 1.0, 2.0}) {
      for (double s : {0.3, 0.5, 0.7}) {
        const BoundResult r = bound_ww(m, h, s, cfg);
        REQUIRE(r.status == BoundStatus::ok);
        CHECK(*r.numerator ==
              doctest::Approx(oracle.num(h, s)).epsilon(1e-9));
        CHECK(*r.denominator ==
              doctest::Approx(oracle.den(h, s)).epsilon(1e-9));
      }
    }
  }

  // closed upper endpoint: a single surviving ratio term
  const ScalarModel unit = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  const BoundResult edge = bound_ww(unit, 1.0, 1.0, cfg);
  REQUIRE(edge.status == BoundStatus::ok);
  CHECK(*edge.numerator == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(*edge.denominator ==
        doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-9));
}

TEST_CASE("master inequality across models, flavors, and the probe grid") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel models[] = {
      make_model(GaussianGaussianSpec{1.0, 1.0, 1}),
      make_model(DiscreteChannelSpec{0.2}),
      make_model(UniformLocationSpec{1.0, 1.0}),
  };
  for (const ScalarModel& m : models) {
    const double risk = *bayes_risk_exact(m, cfg).value;
    for (PsiFamily family : {PsiFamily::ww, PsiFamily::cond}) {
      for (double h : {0.25, 0.5, 1.0, 2.0}) {
        for (double s : {0.3, 0.5, 0.9}) {
          PsiSpec spec;
          spec.family = family;
          spec.h = h;
          spec.s = s;
          const BoundResult results[] = {
              bound_global(m, spec, cfg),
              bound_avg_conditional(m, spec, cfg),
              bound_avg_theta(m, spec, cfg),
          };
          for (const BoundResult& r : results) {
            if (r.status != BoundStatus::ok) continue;
            CHECK(*r.value <= risk + 1e-7);
            CHECK(*r.value >= 0.0);
          }
        }
      }
    }
  }
}

TEST_CASE("equality at the optimal test function, all four flavors") {
  const IntegrationConfig cfg = cfg_n(129);
  const ScalarModel models[] = {
      make_model(GaussianGaussianSpec{1.0, 1.0, 1}),
      make_model(DiscreteChannelSpec{0.2}),
      make_model(UniformLocationSpec{1.0, 1.0}),
  };
  PsiSpec opt;
  opt.family = PsiFamily::optimal;
  for (const ScalarModel& m : models) {
    const double risk = *bayes_risk_exact(m, cfg).value;
    for (const BoundResult& r :
         {bound_global(m, opt, cfg), bound_avg_conditional(m, opt, cfg),
          bound_avg_theta(m, opt, cfg)}) {
      REQUIRE(r.status == BoundStatus::ok);
      CHECK(std::fabs(*r.value - risk) <= 1e-7);
    }
    // conditional flavor attains the posterior variance pointwise
    const std::vector<double> probes = default_y_probes(m, cfg);
    for (double y : probes) {
      const BoundResult c = bound_conditional(m, opt, y, cfg);
      if (c.status != BoundStatus::ok) continue;
      CHECK(std::fabs(*c.value - posterior_variance(m, y, cfg)) <= 1e-7);
    }
  }
}

TEST_CASE("conditional bounds stay below the posterior variance") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  for (double y : {-1.5, 0.0, 0.8}) {
    const double pv = posterior_variance(m, y, cfg);
    for (double h : {0.5, 1.0}) {
      PsiSpec spec;
      spec.h = h;
      spec.s = 0.5;
      const BoundResult r = bound_conditional(m, spec, y, cfg);
      REQUIRE(r.status == BoundStatus::ok);
      CHECK(*r.value <= pv + 1e-9);
      const BoundResult wc = bound_ww_conditional(m, h, 0.5, y, cfg);
      REQUIRE(wc.status == BoundStatus::ok);
      CHECK(*wc.value <= pv + 1e-9);
    }
  }
}

TEST_CASE("shortcut and centered global agree when centering is automatic") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel models[] = {
      make_model(GaussianGaussianSpec{1.0, 1.0, 1}),
      make_model(DiscreteChannelSpec{0.2}),
  };
  for (const ScalarModel& m : models) {
    for (double h : {0.5, 1.0, 2.0}) {
      for (double s : {0.3, 0.5}) {
        PsiSpec spec;
        spec.h = h;
        spec.s = s;
        const BoundResult a = bound_ww(m, h, s, cfg);
        const BoundResult b = bound_global(m, spec, cfg);
        REQUIRE(a.status == b.status);
        if (a.status != BoundStatus::ok) continue;
        CHECK(std::fabs(*a.value - *b.value) <= 1e-8);
      }
    }
  }
}

TEST_CASE("averaged conditional dominates the global ratio") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  for (double h : {0.5, 1.0, 2.0}) {
    PsiSpec spec;
    spec.h = h;
    spec.s = 0.5;
    const BoundResult avg = bound_avg_conditional(m, spec, cfg);
    const BoundResult gl = bound_global(m, spec, cfg);
    REQUIRE(avg.status == BoundStatus::ok);
    REQUIRE(gl.status == BoundStatus::ok);
    CHECK(*avg.value >= *gl.value - 1e-9);
  }
}

TEST_CASE("centering re-check throws when quadrature cannot support the shift") {
  IntegrationConfig coarse;
  coarse.nodes_per_axis = 33;
  coarse.tail_sigmas = 4.0;
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  CHECK_THROWS_AS(bound_ww(m, 4.0, 0.9, coarse), ConditionViolated);
  // the recorded deviation is tiny when the grid is adequate
  const BoundResult ok = bound_ww(m, 1.0, 0.5, cfg_n(65));
  REQUIRE(ok.meta.count("zero_condition_dev") == 1);
  CHECK(ok.meta.at("zero_condition_dev") <= 1e-8);
}

TEST_CASE("degenerate denominators are flagged, not divided") {
  const IntegrationConfig cfg = cfg_n(65);
  // shifting past the window support kills both ratio terms
  const ScalarModel ul = make_model(UniformLocationSpec{1.0, 1.0});
  const BoundResult r = bound_ww(ul, 3.0, 0.5, cfg);
  CHECK(r.status == BoundStatus::degenerate_denominator);
  CHECK_FALSE(r.value.has_value());

  PsiSpec zero;
  zero.family = PsiFamily::custom;
  zero.custom_fn = [](double, double) { return 0.0; };
  const BoundResult g = bound_global(ul, zero, cfg);
  CHECK(g.status == BoundStatus::degenerate_denominator);
}

TEST_CASE("asymptotic flavor: gaussian closed form and regimes") {
  const IntegrationConfig cfg = cfg_n(65);
  for (int n : {1, 10, 100}) {
    const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, n});
    const BoundResult r = bound_asymptotic(m, cfg);
    REQUIRE(r.status == BoundStatus::ok);
    // information per reduced observation is n / var_noise
    CHECK(*r.value == doctest::Approx(1.0 / n).epsilon(1e-9));
    CHECK(r.meta.count("regime_note") == 1);
    const double risk = *bayes_risk_exact(m, cfg).value;
    CHECK(*r.value / risk == doctest::Approx(1.0 + 1.0 / n).epsilon(1e-6));
  }
}

TEST_CASE("asymptotic flavor: hard supports and discrete parameters") {
  const IntegrationConfig cfg = cfg_n(65);
  const BoundResult ul =
      bound_asymptotic(make_model(UniformLocationSpec{1.0, 1.0}), cfg);
  CHECK(ul.status == BoundStatus::non_regular);
  CHECK_FALSE(ul.value.has_value());

  const BoundResult dc =
      bound_asymptotic(make_model(DiscreteChannelSpec{0.2}), cfg);
  CHECK(dc.status == BoundStatus::unsupported);
}

TEST_CASE("small-shift study approaches its targets monotonically") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  const LimitReport rep =
      limit_check_small_h(m, 1.0, {0.5, 0.25, 0.1, 0.05, 0.01}, cfg);
  REQUIRE(rep.rows.size() == 5);
  CHECK(rep.limit_num_over_h == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(rep.limit_den_over_h2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(rep.limit_bound == doctest::Approx(0.25).epsilon(1e-8));
  for (std::size_t i = 1; i < rep.rows.size(); ++i) {
    CHECK(rep.rows[i].dev_bound <= rep.rows[i - 1].dev_bound);
  }
  CHECK(rep.rows.back().dev_bound <= 0.01);
  // denominator over h^2 follows (e^{h^2} - 1) / h^2 for the unit pair
  for (const LimitRow& row : rep.rows) {
    const double expect = std::expm1(row.h * row.h) / (row.h * row.h);
    CHECK(row.den_over_h2 == doctest::Approx(expect).epsilon(1e-6));
  }
  REQUIRE(rep.fitted_order.has_value());
  CHECK(*rep.fitted_order == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("small-shift study validates its inputs") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel gg = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  CHECK_THROWS_AS(limit_check_small_h(gg, 0.5, {0.5, 0.25}, cfg), InvalidSpec);
  CHECK_THROWS_AS(limit_check_small_h(gg, 1.0, {0.25, 0.5}, cfg), InvalidSpec);
  CHECK_THROWS_AS(limit_check_small_h(gg, 1.0, {0.5, 1e-4}, cfg), InvalidSpec);
  const ScalarModel ul = make_model(UniformLocationSpec{1.0, 1.0});
  CHECK_THROWS_AS(limit_check_small_h(ul, 1.0, {0.5, 0.25}, cfg), InvalidSpec);
}

TEST_CASE("posterior variance matches the gaussian closed form") {
  const IntegrationConfig cfg = cfg_n(129);
  const ScalarModel m = make_model(GaussianGaussianSpec{2.0, 0.5, 1});
  const double expect = 2.0 * 0.5 / (2.0 + 0.5);
  for (double y : {-1.0, 0.0, 1.7}) {
    CHECK(posterior_variance(m, y, cfg) ==
          doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("meta carries the probe coordinates") {
  const IntegrationConfig cfg = cfg_n(65);
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  PsiSpec spec;
  spec.h = 1.0;
  spec.s = 0.5;
  const BoundResult c = bound_conditional(m, spec, 0.7, cfg);
  REQUIRE(c.meta.count("y") == 1);
  CHECK(c.meta.at("y") == 0.7);
  REQUIRE(c.meta.count("h") == 1);
  CHECK(c.meta.at("h") == 1.0);
  const BoundResult w = bound_ww(m, 2.0, 0.25, cfg);
  CHECK(w.meta.at("h") == 2.0);
  CHECK(w.meta.at("s") == 0.25);
}
