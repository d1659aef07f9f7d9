#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "nosd/influence.hpp"
#include "oracles.hpp"

using namespace nosd;

TEST_CASE("indicator cell resolution") {
  const auto plan = sim1_plan();  // group 1 tau = (0.1, 0.7, 1.6)

  CHECK(indicator_cell({0, 0.05, 1}, plan) == 0);   // (l=1, r=1)
  CHECK(indicator_cell({0, 2.0, 1}, plan) == 6);    // past tau_L: survival cell
  CHECK(indicator_cell({0, 0.7, 2}, plan) == 3);    // boundary is right-closed: (l=2, r=2)
  CHECK(indicator_cell({0, 0.71, 2}, plan) == 5);   // just past the boundary: (l=3, r=2)
  CHECK(indicator_cell({0, 0.0, 1}, plan) == 0);
  CHECK_THROWS_AS(indicator_cell({7, 0.1, 1}, plan), std::invalid_argument);
  CHECK_THROWS_AS(indicator_cell({0, -1.0, 1}, plan), std::invalid_argument);
  CHECK_THROWS_AS(indicator_cell({0, 0.1, 3}, plan), std::invalid_argument);
}

TEST_CASE("influence function of the WMDPDE") {
  const auto truth = sim1_truth();

  SECTION("single-group plan matches a direct evaluation") {
    const TestPlan one{{{30, 2.0, {0.8}}}};  // 3 cells
    const double gamma = 0.4;
    const auto cells = cell_probabilities(truth, one.groups[0]).flat();
    const auto U = cell_prob_gradient(truth, one.groups[0]);
    const auto sw = sandwich_covariance(truth, one, gamma);
    // contamination in the first cell (t in (0, 0.8], cause 1)
    Eigen::Vector4d expected = Eigen::Vector4d::Zero();
    for (int h = 0; h < 3; ++h) {
      const double delta = h == 0 ? 1.0 : 0.0;
      expected += 30.0 * (delta - cells[h]) * std::pow(cells[h], gamma - 1.0) * U.col(h);
    }
    expected = sw.Q.inverse() * expected / 30.0;
    const auto got = if_wmdpde({0, 0.5, 1}, truth, one, gamma);
    CHECK((got - expected).norm() < 1e-12);
  }
  SECTION("cell-probability-weighted average over all cells vanishes") {
    const TestPlan one{{{30, 2.0, {0.4, 1.1}}}};  // 5 cells
    const double gamma = 0.6;
    const auto cells = cell_probabilities(truth, one.groups[0]).flat();
    // hit each cell through a representative (t, cause) point
    const std::vector<ContaminationPoint> pts = {
        {0, 0.2, 1}, {0, 0.2, 2}, {0, 0.8, 1}, {0, 0.8, 2}, {0, 5.0, 1}};
    Eigen::Vector4d avg = Eigen::Vector4d::Zero();
    for (std::size_t h = 0; h < cells.size(); ++h) {
      REQUIRE(indicator_cell(pts[h], one) == static_cast<int>(h));
      avg += cells[h] * if_wmdpde(pts[h], truth, one, gamma);
    }
    CHECK(avg.norm() < 1e-8);
  }
  SECTION("bounded over the default grid, with gamma damping the peak") {
    const auto plan = sim1_plan();
    const auto grid = default_time_grid(plan, 41);
    double sup02 = 0.0, sup08 = 0.0;
    for (double t : grid) {
      sup02 = std::max(sup02, if_wmdpde({0, t, 1}, truth, plan, 0.2).cwiseAbs().maxCoeff());
      sup08 = std::max(sup08, if_wmdpde({0, t, 1}, truth, plan, 0.8).cwiseAbs().maxCoeff());
    }
    CHECK(std::isfinite(sup02));
    CHECK(std::isfinite(sup08));
    CHECK(sup08 < sup02);
  }
}

TEST_CASE("influence function of the WRBE") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();

  SECTION("degenerate posterior gives the zero vector") {
    PosteriorChains constant;
    constant.draws = {std::vector<std::array<double, 4>>(50, {-0.2, -0.06, 0.3, -0.17})};
    constant.accept_rate = {0.0};
    const auto v = if_wrbe({0, 0.5, 1}, constant, plan, 0.4);
    CHECK(v.norm() == 0.0);
  }
  SECTION("finite on a spread-out chain") {
    PosteriorChains chains;
    chains.draws.resize(1);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
      std::array<double, 4> x;
      for (int j = 0; j < 4; ++j) x[j] = truth[j] + 0.05 * rng.normal();
      chains.draws[0].push_back(x);
    }
    chains.accept_rate = {1.0};
    for (double t : {0.0, 0.5, 1.5, 4.0}) {
      const auto v = if_wrbe({0, t, 2}, chains, plan, 0.3);
      CHECK(v.allFinite());
    }
  }
}

TEST_CASE("influence function of the Bayes factor") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();

  PosteriorChains chains;
  chains.draws.resize(1);
  Rng rng(14);
  for (int i = 0; i < 400; ++i) {
    std::array<double, 4> x;
    for (int j = 0; j < 4; ++j) x[j] = truth[j] + 0.1 * rng.normal();
    chains.draws[0].push_back(x);
  }
  chains.accept_rate = {1.0};

  HypothesisSpec hyp;
  hyp.lambda0 = truth;
  hyp.radius = 0.12;

  SECTION("zero when the factor itself is zero") {
    CHECK(if_bayes_factor({0, 0.5, 1}, chains, plan, 0.4, 0.0, hyp) == 0.0);
  }
  SECTION("finite scalar on a populated split") {
    const double v = if_bayes_factor({0, 0.5, 1}, chains, plan, 0.4, 2.5, hyp);
    CHECK(std::isfinite(v));
  }
  SECTION("an empty region is an error") {
    HypothesisSpec far = hyp;
    far.lambda0 = {10, 10, 10, 10};
    CHECK_THROWS_AS(if_bayes_factor({0, 0.5, 1}, chains, plan, 0.4, 2.5, far),
                    std::runtime_error);
  }
}

TEST_CASE("influence curves and CSV emission") {
  const auto plan = sim1_plan();
  const auto truth = sim1_truth();
  const auto grid = default_time_grid(plan, 11);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == Catch::Approx(1.5 * 3.0));

  const auto curve = if_curve_wmdpde(truth, plan, 0.2, 1, grid);
  REQUIRE(curve.t.size() == 11);
  REQUIRE(curve.values.size() == 11);

  std::ostringstream os;
  write_if_csv(os, {curve});
  const std::string csv = os.str();
  CHECK(csv.rfind("t,gamma,estimator,component,value\n", 0) == 0);
  CHECK(csv.find("wmdpde") != std::string::npos);
  CHECK(csv.find(",a1,") != std::string::npos);
  // one header plus 4 components per grid point
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  CHECK(lines == 1 + 4 * 11);
}
