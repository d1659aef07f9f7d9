#include <catch2/catch_amalgamated.hpp>

#include "nosd/testing.hpp"
#include "oracles.hpp"

using namespace nosd;

TEST_CASE("Bayes factor interpretation bands") {
  CHECK(interpret_bf(23.5) == "Strong");
  CHECK(interpret_bf(0.5) == "Negative");
  CHECK(interpret_bf(3.0) == "Positive");  // closed-left band edge
  CHECK(interpret_bf(1.0) == "Not worth more than a bare mention");
  CHECK(interpret_bf(19.999) == "Positive");
  CHECK(interpret_bf(20.0) == "Strong");
  CHECK(interpret_bf(150.0) == "Very Strong");
  CHECK(interpret_bf(1e6) == "Very Strong");
  CHECK_THROWS_AS(interpret_bf(0.0), std::invalid_argument);
}

TEST_CASE("empirical Bayes factor") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  const auto counts = simulate_counts(truth, plan, 808);

  PriorSpec prior;
  prior.kind = PriorKind::normal;

  HmcConfig mc;
  mc.step_size = 0.02;
  mc.n_leapfrog = 5;
  mc.n_samples = 2500;
  mc.burn_in = 500;
  mc.mass_diag = {20, 20, 20, 20};
  mc.n_chains = 2;
  mc.seed = 99;

  HypothesisSpec hyp;
  hyp.lambda0 = truth;
  hyp.radius = 0.5;

  SECTION("the construction identity holds exactly") {
    const auto r = bayes_factor(plan, counts, 0.4, prior, hyp, mc);
    CHECK(r.bf01 * r.prior_odds == Catch::Approx(r.posterior_odds).epsilon(1e-12));
    CHECK(r.category == interpret_bf(r.bf01));
    CHECK(r.prior_odds > 0.0);
    CHECK(r.posterior_odds > 0.0);
  }
  SECTION("suppressing the data term drives the factor to one") {
    PriorSpec flat = prior;
    flat.posterior_scale = 0.0;  // posterior == prior
    const auto r = bayes_factor(plan, counts, 0.4, flat, hyp, mc);
    CHECK(r.bf01 > 0.4);
    CHECK(r.bf01 < 2.5);  // equal in distribution, Monte Carlo error only
  }
  SECTION("an empty ball is reported as an error") {
    HypothesisSpec tiny = hyp;
    tiny.lambda0 = {5.0, 5.0, -5.0, 5.0};  // far outside the posterior mass
    tiny.radius = 1e-4;
    CHECK_THROWS_WITH(bayes_factor(plan, counts, 0.4, prior, tiny, mc),
                      Catch::Matchers::ContainsSubstring("radius"));
  }
  SECTION("a numeric prior probability fixes the prior odds") {
    HypothesisSpec fixed = hyp;
    fixed.rho0 = 0.25;
    const auto r = bayes_factor(plan, counts, 0.4, prior, fixed, mc);
    CHECK(r.prior_odds == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("goodness-of-fit statistic") {
  const auto [plan, counts] = seer_pancreatic_2016();
  const ModelParams at{-0.5, 0.2, 0.4, 0.1};

  SECTION("nonnegative and invariant to group reordering") {
    const double t = gof_statistic(at, plan, counts);
    CHECK(t >= 0.0);
    TestPlan plan_r = plan;
    FailureCounts counts_r = counts;
    std::swap(plan_r.groups[0], plan_r.groups[2]);
    std::swap(counts_r.groups[0], counts_r.groups[2]);
    CHECK(gof_statistic(at, plan_r, counts_r) == Catch::Approx(t).epsilon(1e-14));
  }
  SECTION("bootstrap validates its sample size") {
    CHECK_THROWS_AS(gof_bootstrap(plan, counts, 50, 1), std::invalid_argument);
  }
}

TEST_CASE("gof bootstrap calibration") {
  // when the data really come from the fitted family, the p-value is
  // roughly uniform; its average over meta-replicates sits near one half
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  double mean_p = 0.0;
  const int meta = 20;
  for (int m = 0; m < meta; ++m) {
    const auto data = simulate_counts(truth, plan, 5000 + m);
    const auto r = gof_bootstrap(plan, data, 100, 9000 + 101 * m, truth);
    mean_p += r.p_value;
  }
  mean_p /= meta;
  CHECK(mean_p > 0.30);
  CHECK(mean_p < 0.70);
}

TEST_CASE("bootstrap bias and rmse") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  const auto counts = simulate_counts(truth, plan, 9090);

  SECTION("a constant estimator reproduces its own offset") {
    const ModelParams constant{-0.3, 0.1, 0.2, -0.1};
    const EstimatorFn fixed = [&](const TestPlan&, const FailureCounts&,
                                  std::optional<ModelParams>) { return constant; };
    const auto r = bootstrap_bias_rmse(plan, counts, fixed, 100, 7);
    for (int j = 0; j < 4; ++j) {
      CHECK(r.bias[j] == Catch::Approx(0.0).margin(1e-14));
      CHECK(r.rmse[j] == Catch::Approx(std::abs(r.bias[j])).margin(1e-14));
    }
  }
  SECTION("an estimator offset from the point estimate shows up as bias") {
    // point estimate from the first call, then every refit lands 0.1 high
    bool first = true;
    ModelParams anchor;
    const EstimatorFn off = [&](const TestPlan& p, const FailureCounts& c,
                                std::optional<ModelParams> init) {
      if (first) {
        first = false;
        anchor = fit_mle(p, c, init).params;
        return anchor;
      }
      ModelParams shifted = anchor;
      shifted.a1 += 0.1;
      return shifted;
    };
    const auto r = bootstrap_bias_rmse(plan, counts, off, 100, 7, truth);
    CHECK(r.bias[0] == Catch::Approx(0.1).margin(1e-12));
    CHECK(r.rmse[0] == Catch::Approx(0.1).margin(1e-12));
    CHECK(r.rmse[1] == 0.0);
  }
  SECTION("rmse dominates the absolute bias") {
    EstimatorSpec spec;
    spec.kind = EstimatorSpec::Kind::wmdpde;
    spec.gamma = 0.6;
    const auto r = bootstrap_bias_rmse(plan, counts, spec.fn(), 120, 3, truth);
    CHECK(r.n_used > 100);
    for (int j = 0; j < 4; ++j) CHECK(r.rmse[j] >= std::abs(r.bias[j]) - 1e-12);
  }
}
