#include <doctest.h>

#include <cmath>
#include <riskbound/errors.hpp>
#include <riskbound/model.hpp>
#include <riskbound/numeric.hpp>

#include "support/simple_quad.hpp"

using namespace riskbound;

TEST_CASE("catalog specs validate their parameters") {
  CHECK_THROWS_AS(make_model(GaussianGaussianSpec{0.0, 1.0, 1}), InvalidSpec);
  CHECK_THROWS_AS(make_model(GaussianGaussianSpec{1.0, -1.0, 1}), InvalidSpec);
  CHECK_THROWS_AS(make_model(GaussianGaussianSpec{1.0, 1.0, 0}), InvalidSpec);
  CHECK_THROWS_AS(make_model(DiscreteChannelSpec{0.0}), InvalidSpec);
  CHECK_THROWS_AS(make_model(DiscreteChannelSpec{0.5}), InvalidSpec);
  CHECK_THROWS_AS(make_model(DiscreteChannelSpec{-0.1}), InvalidSpec);
  CHECK_THROWS_AS(make_model(UniformLocationSpec{1.0, 0.0}), InvalidSpec);
  CHECK_THROWS_AS(make_model(UniformLocationSpec{-1.0, 1.0}), InvalidSpec);
}

TEST_CASE("gaussian pair: densities, posterior mean, score") {
  const ScalarModel m = make_model(GaussianGaussianSpec{2.0, 0.5, 1});

  SUBCASE("prior is the declared normal density") {
    const double v = 2.0;
    for (double t : {-1.5, 0.0, 0.7, 2.2}) {
      const double expect =
          std::exp(-t * t / (2.0 * v)) / std::sqrt(2.0 * M_PI * v);
      CHECK(m.prior(t) == doctest::Approx(expect).epsilon(1e-12));
      CHECK(std::exp(m.log_prior(t)) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  SUBCASE("likelihood integrates to one over y") {
    for (double t : {-1.0, 0.0, 1.3}) {
      const double total = simple_quad::simpson(
          [&](double y) { return m.likelihood(y, t); }, t - 9.0, t + 9.0, 4000);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }

  SUBCASE("analytic posterior mean matches the shrinkage formula") {
    REQUIRE(m.analytic_posterior_mean.has_value());
    const double shrink = 2.0 / (2.0 + 0.5);
    for (double y : {-2.0, -0.3, 0.0, 1.7}) {
      CHECK((*m.analytic_posterior_mean)(y) ==
            doctest::Approx(shrink * y).epsilon(1e-12));
    }
  }

  SUBCASE("analytic score matches a finite difference of the log likelihood") {
    REQUIRE(m.analytic_score.has_value());
    const double eps = 1e-6;
    for (double y : {-1.0, 0.4}) {
      for (double t : {-0.8, 0.0, 1.1}) {
        const double fd =
            (m.log_likelihood(y, t + eps) - m.log_likelihood(y, t - eps)) /
            (2.0 * eps);
        CHECK((*m.analytic_score)(y, t) == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("gaussian pair with repeated observations reduces to the mean") {
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 4});
  CHECK(m.obs_dim == 4);

  SUBCASE("reduced likelihood has variance var_noise / n") {
    // sd 0.5: density at the center must be 1/(sqrt(2 pi) * 0.5)
    const double peak = m.likelihood(0.3, 0.3);
    CHECK(peak == doctest::Approx(1.0 / (std::sqrt(2.0 * M_PI) * 0.5))
                      .epsilon(1e-12));
  }

  SUBCASE("reduce averages the coordinates") {
    const std::vector<double> y = {1.0, 2.0, 3.0, 6.0};
    CHECK(m.reduce(y) == doctest::Approx(3.0).epsilon(1e-15));
  }

  SUBCASE("full-vector density agrees with the product of coordinates") {
    const std::vector<double> y = {0.2, -0.4, 1.0, 0.6};
    double prod = 1.0;
    for (double yi : y) {
      prod *= std::exp(-(yi - 0.5) * (yi - 0.5) / 2.0) /
              std::sqrt(2.0 * M_PI);
    }
    CHECK(m.likelihood_full(y, 0.5) == doctest::Approx(prod).epsilon(1e-12));
  }
}

TEST_CASE("two-point channel: masses and posterior") {
  const ScalarModel m = make_model(DiscreteChannelSpec{0.2});
  CHECK(m.theta_discrete);
  CHECK(m.obs_discrete);
  REQUIRE(m.parameter_space.kind == SpaceKind::finite);
  REQUIRE(m.parameter_space.points.size() == 2);
  CHECK(m.parameter_space.points[0] == -1.0);
  CHECK(m.parameter_space.points[1] == 1.0);

  SUBCASE("transition masses") {
    CHECK(m.likelihood(1.0, 1.0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(m.likelihood(-1.0, 1.0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(m.likelihood(1.0, -1.0) == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(m.prior(1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.prior(-1.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.prior(0.0) == 0.0);
  }

  SUBCASE("posterior mean is y scaled by one minus twice the flip mass") {
    REQUIRE(m.analytic_posterior_mean.has_value());
    CHECK((*m.analytic_posterior_mean)(1.0) ==
          doctest::Approx(0.6).epsilon(1e-15));
    CHECK((*m.analytic_posterior_mean)(-1.0) ==
          doctest::Approx(-0.6).epsilon(1e-15));
  }
}

TEST_CASE("uniform window: hard support both directions") {
  const ScalarModel m = make_model(UniformLocationSpec{1.0, 1.0});
  CHECK(m.y_support_hard);
  CHECK(m.theta_support_hard_given_y);
  CHECK_FALSE(m.analytic_posterior_mean.has_value());
  CHECK_FALSE(m.analytic_score.has_value());

  SUBCASE("likelihood is flat inside the window and zero outside") {
    CHECK(m.likelihood(0.2, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.likelihood(0.49, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(m.likelihood(0.51, 0.0) == 0.0);
    CHECK(m.likelihood(-0.51, 0.0) == 0.0);
    CHECK(std::isinf(m.log_likelihood(0.51, 0.0)));
  }

  SUBCASE("conditional theta range is the reflected window") {
    const Interval iv = m.theta_range_given_y(0.3, 6.0);
    CHECK(iv.lo == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(iv.hi == doctest::Approx(0.8).epsilon(1e-12));
  }

  SUBCASE("prior is standard normal for unit variance") {
    CHECK(m.prior(0.0) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("labels and digests distinguish parameterizations") {
  const ScalarModel a = make_model(GaussianGaussianSpec{1.0, 1.0, 1});
  const ScalarModel b = make_model(GaussianGaussianSpec{1.0, 1.0, 2});
  const ScalarModel c = make_model(DiscreteChannelSpec{0.2});
  CHECK(a.label != b.label);
  CHECK(a.label != c.label);
  CHECK(model_digest(a) != model_digest(b));
  CHECK(model_digest(a) == model_digest(make_model(GaussianGaussianSpec{1.0, 1.0, 1})));
}

TEST_CASE("joint density helpers respect dimensions") {
  const ScalarModel m = make_model(GaussianGaussianSpec{1.0, 1.0, 2});
  const std::vector<double> good = {0.1, 0.5};
  const std::vector<double> bad = {0.1};
  CHECK(joint_density(m, good, 0.0) > 0.0);
  CHECK_THROWS_AS(joint_density(m, bad, 0.0), DomainError);
  CHECK_THROWS_AS(conditional_density(m, bad, 0.0), DomainError);
}

TEST_CASE("samplers hit the declared supports") {
  const ScalarModel dc = make_model(DiscreteChannelSpec{0.3});
  Rng rng{7};
  for (int i = 0; i < 200; ++i) {
    const double t = dc.sample_prior(rng);
    CHECK(std::fabs(t) == 1.0);
    const double y = dc.sample_obs(t, rng);
    CHECK(std::fabs(y) == 1.0);
  }

  const ScalarModel ul = make_model(UniformLocationSpec{1.0, 2.0});
  for (int i = 0; i < 200; ++i) {
    const double t = ul.sample_prior(rng);
    const double y = ul.sample_obs(t, rng);
    CHECK(y >= t - 1.0);
    CHECK(y <= t + 1.0);
  }
}
