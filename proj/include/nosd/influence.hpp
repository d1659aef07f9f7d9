#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "nosd/fit.hpp"
#include "nosd/hmc.hpp"
#include "nosd/testing.hpp"

namespace nosd {

// A single contamination point: failure time t attributed to one cause.
// It resolves to exactly one cell per group: the interval containing t
// (right-closed) for the matching cause, or the survival cell when
// t exceeds the last inspection time.
struct ContaminationPoint {
  int group = 0;  // used by indicator_cell; the IF sums apply t to all groups
  double time = 0.0;
  int cause = 1;  // 1 or 2

  void validate() const {
    if (!(time >= 0.0)) throw std::invalid_argument("ContaminationPoint: time must be >= 0");
    if (cause != 1 && cause != 2)
      throw std::invalid_argument("ContaminationPoint: cause must be 1 or 2");
  }
};

// Flat h-order cell index hit by the contamination point in its group.
inline int indicator_cell(const ContaminationPoint& pt, const TestPlan& plan) {
  pt.validate();
  if (pt.group < 0 || pt.group >= static_cast<int>(plan.groups.size()))
    throw std::invalid_argument("indicator_cell: group index out of range");
  const auto& tau = plan.groups[pt.group].tau;
  for (std::size_t l = 0; l < tau.size(); ++l)
    if (pt.time <= tau[l]) return 2 * static_cast<int>(l) + (pt.cause - 1);
  return 2 * static_cast<int>(tau.size());  // survival cell
}

namespace detail {

inline std::vector<int> cells_hit(const ContaminationPoint& pt, const TestPlan& plan) {
  std::vector<int> hit(plan.groups.size());
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    ContaminationPoint p = pt;
    p.group = static_cast<int>(i);
    hit[i] = indicator_cell(p, plan);
  }
  return hit;
}

}  // namespace detail

// Influence function of the WMDPDE functional:
//   (Q_gamma^-1 / G) sum_i g_i sum_h (delta_ih - p_ih) p_ih^{gamma-1} dp_ih/dLambda
inline Eigen::Vector4d if_wmdpde(const ContaminationPoint& pt, const ModelParams& params,
                                 const TestPlan& plan, double gamma) {
  plan.validate();
  const auto hit = detail::cells_hit(pt, plan);
  const auto sw = sandwich_covariance(params, plan, gamma);  // throws if Q singular
  Eigen::Vector4d acc = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    const auto U = cell_prob_gradient(params, plan.groups[i]);
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const double delta = (static_cast<int>(h) == hit[i]) ? 1.0 : 0.0;
      acc += plan.groups[i].devices * (delta - cells[h]) *
             detail::pow_gamma(cells[h], gamma - 1.0) * U.col(h);
    }
  }
  return sw.Q.inverse() * acc / plan.total_devices();
}

// Contamination score entering the Bayesian influence functions.
inline double x_gamma(const ContaminationPoint& pt, const ModelParams& params,
                      const TestPlan& plan, double gamma) {
  const auto hit = detail::cells_hit(pt, plan);
  const auto w = plan.weights();
  double acc = 0.0;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const double delta = (static_cast<int>(h) == hit[i]) ? 1.0 : 0.0;
      acc += w[i] * (delta - cells[h]) * detail::pow_gamma(cells[h], gamma);
    }
  }
  return acc / gamma;
}

// Influence function of the WRBE: posterior covariance between Lambda
// and the contamination score X_gamma, estimated over the HMC draws.
inline Eigen::Vector4d if_wrbe(const ContaminationPoint& pt, const PosteriorChains& chains,
                               const TestPlan& plan, double gamma) {
  if (chains.total_draws() == 0) throw std::invalid_argument("if_wrbe: empty chains");
  const std::size_t n = chains.total_draws();
  std::array<double, 4> mean_lambda{};
  double mean_x = 0.0;
  std::vector<double> xs;
  xs.reserve(n);
  chains.for_each([&](const std::array<double, 4>& draw) {
    const double x = x_gamma(pt, ModelParams::from_array(draw), plan, gamma);
    xs.push_back(x);
    mean_x += x;
    for (int j = 0; j < 4; ++j) mean_lambda[j] += draw[j];
  });
  mean_x /= n;
  for (double& v : mean_lambda) v /= static_cast<double>(n);
  Eigen::Vector4d cov = Eigen::Vector4d::Zero();
  std::size_t t = 0;
  chains.for_each([&](const std::array<double, 4>& draw) {
    const double dx = xs[t++] - mean_x;
    for (int j = 0; j < 4; ++j) cov[j] += (draw[j] - mean_lambda[j]) * dx;
  });
  return cov / static_cast<double>(n);
}

// Influence function of the Bayes factor under the null:
//   Y_gamma * ( E[X_gamma | Theta0] - E[X_gamma | Theta1] )
// with Y_gamma estimated by BF01 and the expectations taken over the
// posterior draws inside and outside the epsilon-ball.
inline double if_bayes_factor(const ContaminationPoint& pt, const PosteriorChains& chains,
                              const TestPlan& plan, double gamma, double bf01,
                              const HypothesisSpec& hyp) {
  hyp.validate();
  double sum0 = 0.0, sum1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
  chains.for_each([&](const std::array<double, 4>& draw) {
    const double x = x_gamma(pt, ModelParams::from_array(draw), plan, gamma);
    if (hyp.in_ball(draw)) {
      sum0 += x;
      ++n0;
    } else {
      sum1 += x;
      ++n1;
    }
  });
  if (n0 == 0 || n1 == 0)
    throw std::runtime_error("if_bayes_factor: a hypothesis region holds no draws");
  return bf01 * (sum0 / n0 - sum1 / n1);
}

struct IfCurve {
  std::vector<double> t;
  std::vector<std::array<double, 4>> values;  // empty for scalar curves
  std::vector<double> scalar;                 // used by the Bayes-factor curve
  double gamma = 0.0;
  std::string estimator;
};

inline std::vector<double> default_time_grid(const TestPlan& plan, int points = 101) {
  double tmax = 0.0;
  for (const auto& g : plan.groups) tmax = std::max(tmax, g.tau.back());
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = 1.5 * tmax * i / (points - 1);
  return grid;
}

inline IfCurve if_curve_wmdpde(const ModelParams& params, const TestPlan& plan,
                               double gamma, int cause, const std::vector<double>& grid) {
  IfCurve c;
  c.t = grid;
  c.gamma = gamma;
  c.estimator = "wmdpde";
  for (double t : grid) {
    const Eigen::Vector4d v = if_wmdpde({0, t, cause}, params, plan, gamma);
    c.values.push_back({v[0], v[1], v[2], v[3]});
  }
  return c;
}

inline IfCurve if_curve_wrbe(const PosteriorChains& chains, const TestPlan& plan,
                             double gamma, int cause, const std::vector<double>& grid) {
  IfCurve c;
  c.t = grid;
  c.gamma = gamma;
  c.estimator = "wrbe";
  for (double t : grid) {
    const Eigen::Vector4d v = if_wrbe({0, t, cause}, chains, plan, gamma);
    c.values.push_back({v[0], v[1], v[2], v[3]});
  }
  return c;
}

// Plot-ready CSV: t, gamma, estimator, component, value.
inline void write_if_csv(std::ostream& os, const std::vector<IfCurve>& curves) {
  static const char* comp[4] = {"a1", "b1", "a2", "b2"};
  os << "t,gamma,estimator,component,value\n";
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      if (!c.values.empty()) {
        for (int j = 0; j < 4; ++j)
          os << c.t[i] << ',' << c.gamma << ',' << c.estimator << ',' << comp[j] << ','
             << c.values[i][j] << '\n';
      } else {
        os << c.t[i] << ',' << c.gamma << ',' << c.estimator << ",bf," << c.scalar[i]
           << '\n';
      }
    }
}

}  // namespace nosd
