#include <catch2/catch_amalgamated.hpp>

#include "nosd/divergence.hpp"
#include "nosd/fit.hpp"
#include "oracles.hpp"

using namespace nosd;

namespace {

FailureCounts random_counts(const ModelParams& truth, const TestPlan& plan,
                            std::uint64_t seed) {
  return simulate_counts(truth, plan, seed);
}

}  // namespace

TEST_CASE("log likelihood") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  const auto counts = random_counts(truth, plan, 11);

  SECTION("equals the weighted empirical cross-entropy rewrite") {
    const auto qhat = empirical_probs(counts, plan);
    const auto w = plan.weights();
    double rewrite = 0.0;
    for (std::size_t i = 0; i < plan.groups.size(); ++i) {
      const auto cells = cell_probabilities(truth, plan.groups[i]).flat();
      for (std::size_t h = 0; h < cells.size(); ++h)
        if (qhat.q[i][h] > 0.0) rewrite += w[i] * qhat.q[i][h] * std::log(cells[h]);
    }
    rewrite *= plan.total_devices();
    CHECK(log_likelihood(truth, plan, counts) == Catch::Approx(rewrite).epsilon(1e-12));
  }
  SECTION("doubling the data doubles the value") {
    TestPlan plan2 = plan;
    FailureCounts counts2 = counts;
    for (std::size_t i = 0; i < plan.groups.size(); ++i) {
      plan2.groups[i].devices *= 2;
      counts2.groups[i].survivors *= 2;
      for (auto& row : counts2.groups[i].n) {
        row[0] *= 2;
        row[1] *= 2;
      }
    }
    CHECK(log_likelihood(truth, plan2, counts2) ==
          Catch::Approx(2.0 * log_likelihood(truth, plan, counts)).epsilon(1e-12));
  }
  SECTION("local maximality at the fitted estimate") {
    const auto fit = fit_mle(plan, counts, truth);
    oracle::Draws draws(5);
    for (int k = 0; k < 20; ++k) {
      ModelParams perturbed = fit.params;
      for (int j = 0; j < 4; ++j) perturbed[j] += draws.uniform(-0.05, 0.05);
      CHECK(log_likelihood(perturbed, plan, counts) <= fit.objective + 1e-9);
    }
  }
  SECTION("degenerate all-survivor data is rejected") {
    FailureCounts empty;
    empty.groups.resize(plan.groups.size());
    for (std::size_t i = 0; i < plan.groups.size(); ++i) {
      empty.groups[i].n.assign(plan.groups[i].intervals(), {0, 0});
      empty.groups[i].survivors = plan.groups[i].devices;
    }
    CHECK_THROWS_AS(log_likelihood(truth, plan, empty), std::invalid_argument);
  }
}

TEST_CASE("weighted DPD") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  const auto counts = random_counts(truth, plan, 22);

  SECTION("gamma must be positive") {
    CHECK_THROWS_AS(wdpd(truth, plan, counts, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(wdpd(truth, plan, counts, -0.3), std::invalid_argument);
  }
  SECTION("matches the brute-force bracket arithmetic") {
    const auto qhat = empirical_probs(counts, plan);
    const auto w = plan.weights();
    for (double gamma : {0.2, 0.5, 1.0}) {
      double brute = 0.0;
      for (std::size_t i = 0; i < plan.groups.size(); ++i)
        brute += oracle::dpd_bruteforce(cell_probabilities(truth, plan.groups[i]).flat(),
                                        qhat.q[i], gamma, w[i]);
      CHECK(wdpd(truth, plan, counts, gamma) == Catch::Approx(brute).epsilon(1e-12));
    }
  }
  SECTION("two-cell toy value") {
    // p = (0.3, 0.7), q = (0.5, 0.5), gamma = 0.5, single group weight 1:
    // direct evaluation of the three brackets
    const double direct = oracle::dpd_bruteforce({0.3, 0.7}, {0.5, 0.5}, 0.5, 1.0);
    const double byhand = (std::pow(0.3, 1.5) + std::pow(0.7, 1.5)) -
                          3.0 * (0.5 * (std::sqrt(0.3) + std::sqrt(0.7))) +
                          2.0 * (2.0 * std::pow(0.5, 1.5));
    CHECK(direct == Catch::Approx(byhand).epsilon(1e-13));
    CHECK(byhand == Catch::Approx(0.0876207).margin(5e-7));
  }
  SECTION("identical distributions give zero divergence") {
    // brute-force form with q == p
    oracle::Draws draws(3);
    for (int k = 0; k < 20; ++k) {
      const auto cells = cell_probabilities(draws.params(), draws.design()).flat();
      CHECK(std::abs(oracle::dpd_bruteforce(cells, cells, 0.7, 1.0)) < 1e-12);
    }
  }
  SECTION("nonnegative over random draws") {
    oracle::Draws draws(17);
    for (int k = 0; k < 200; ++k) {
      const auto p = draws.params();
      const auto c = random_counts(truth, plan, 1000 + k);
      CHECK(wdpd(p, plan, c, draws.uniform(0.05, 1.0)) > -1e-12);
    }
  }
}

TEST_CASE("KL divergence and the small-gamma limit") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();

  SECTION("zero for identical distributions, nonnegative in general") {
    oracle::Draws draws(8);
    for (int k = 0; k < 100; ++k) {
      const auto counts = random_counts(truth, plan, 500 + k);
      CHECK(kl_divergence(draws.params(), plan, counts) > -1e-13);
    }
  }
  SECTION("wdpd converges to KL as gamma -> 0") {
    for (int k = 0; k < 100; ++k) {
      const auto counts = random_counts(truth, plan, 900 + k);
      const double kl = kl_divergence(truth, plan, counts);
      CHECK(std::abs(wdpd(truth, plan, counts, 1e-6) - kl) < 1e-4);
    }
  }
  SECTION("the convergence is monotone over the stated gammas") {
    const auto counts = random_counts(truth, plan, 77);
    const ModelParams at{-0.1, 0.0, 0.2, -0.2};
    const double kl = kl_divergence(at, plan, counts);
    const double d2 = std::abs(wdpd(at, plan, counts, 1e-2) - kl);
    const double d4 = std::abs(wdpd(at, plan, counts, 1e-4) - kl);
    const double d6 = std::abs(wdpd(at, plan, counts, 1e-6) - kl);
    CHECK(d4 <= d2);
    CHECK(d6 <= d4);
  }
}

TEST_CASE("maximizer objective") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();

  SECTION("constant-offset identity against the WDPD") {
    oracle::Draws draws(13);
    for (int k = 0; k < 100; ++k) {
      const auto counts = random_counts(truth, plan, 2000 + k);
      const auto qhat = empirical_probs(counts, plan);
      const auto w = plan.weights();
      const double gamma = draws.uniform(0.1, 1.0);
      const auto p = draws.params();
      double data_const = 0.0;
      for (std::size_t i = 0; i < plan.groups.size(); ++i)
        for (double q : qhat.q[i])
          if (q > 0.0) data_const += w[i] * std::pow(q, gamma + 1.0) / gamma;
      const double resid = wdpd(p, plan, counts, gamma) +
                           (gamma + 1.0) * bw_objective(p, plan, counts, gamma) - data_const;
      REQUIRE(std::abs(resid) < 1e-10);
    }
  }
  SECTION("gradient matches finite differences") {
    oracle::Draws draws(21);
    double worst = 0.0;
    for (int k = 0; k < 50; ++k) {
      const auto counts = random_counts(truth, plan, 3000 + k);
      const double gamma = draws.uniform(0.1, 1.0);
      const auto p = draws.params();
      const auto g = bw_gradient(p, plan, counts, gamma);
      const auto fd = oracle::fd_gradient(
          [&](const ModelParams& x) { return bw_objective(x, plan, counts, gamma); }, p);
      for (int j = 0; j < 4; ++j)
        worst = std::max(worst,
                         std::abs(g[j] - fd[j]) / std::max(1e-8, std::abs(fd[j])));
    }
    CHECK(worst < 1e-5);
  }
  SECTION("gradient vanishes at the WMDPDE") {
    const auto counts = random_counts(truth, plan, 4242);
    const auto fit = fit_wmdpde(plan, counts, 0.5, truth);
    CHECK(bw_gradient(fit.params, plan, counts, 0.5).norm() < 1e-6);
  }
}
