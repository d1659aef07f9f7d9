#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nosd/data.hpp"
#include "nosd/model.hpp"

namespace nosd {

// Probabilities are clamped at this floor only where they enter
// logarithms or negative powers; the normalization identity is always
// checked on unclamped values.
inline constexpr double kProbFloor = 1e-300;

namespace detail {

template <class S>
S clamp_prob(const S& p) {
  if (scalar_value(p) < kProbFloor) return S(kProbFloor);
  return p;
}

// p^g computed as exp(g * ln p) on the clamped probability.
template <class S>
S pow_gamma(const S& p, double g) {
  using nosd::exp;
  using nosd::log;
  using std::exp;
  using std::log;
  return exp(S(g) * log(clamp_prob(p)));
}

// B^w_gamma, the maximizer objective whose exponential robustifies the
// posterior.  Generic over scalar type; gradients come from Dual4.
template <class S>
S bw_objective_t(const ModelParams& params, const TestPlan& plan,
                 const EmpiricalProbs& qhat, double gamma) {
  const auto w = plan.weights();
  S total(0.0);
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probs_t<S>(params, plan.groups[i]);
    S fit(0.0), model(0.0);
    for (std::size_t h = 0; h < cells.size(); ++h) {
      fit += S(qhat.q[i][h]) * pow_gamma(cells[h], gamma);
      model += pow_gamma(cells[h], gamma + 1.0);
    }
    total += S(w[i]) * (fit / S(gamma) - model / S(gamma + 1.0));
  }
  return total;
}

}  // namespace detail

// Multinomial log-likelihood (additive constant dropped):
//   sum_i [ k_i ln p_i0 + sum_{l,r} n_ilr ln p_ilr ]
// Returns -inf when a positively-counted cell has zero probability.
inline double log_likelihood(const ModelParams& params, const TestPlan& plan,
                             const FailureCounts& counts) {
  plan.validate();
  counts.validate(plan);
  if (counts.total_failures() <= 0)
    throw std::invalid_argument("log_likelihood: needs at least one observed failure");
  double ll = 0.0;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    const auto n = counts.flat_group(i);
    for (std::size_t h = 0; h < cells.size(); ++h) {
      if (n[h] > 0.0) {
        if (cells[h] <= 0.0) return -std::numeric_limits<double>::infinity();
        ll += n[h] * std::log(cells[h]);
      }
    }
  }
  return ll;
}

// Weighted density power divergence between empirical and model cell
// probabilities; keeps the parameter-free q^(gamma+1) bracket so values
// are comparable across gamma.
inline double wdpd(const ModelParams& params, const TestPlan& plan,
                   const FailureCounts& counts, double gamma) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("wdpd: gamma must be > 0 (use kl_divergence at gamma = 0)");
  plan.validate();
  counts.validate(plan);
  const auto qhat = empirical_probs(counts, plan);
  const auto w = plan.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    double model = 0.0, cross = 0.0, data = 0.0;
    for (std::size_t h = 0; h < cells.size(); ++h) {
      model += detail::pow_gamma(cells[h], gamma + 1.0);
      cross += qhat.q[i][h] * detail::pow_gamma(cells[h], gamma);
      if (qhat.q[i][h] > 0.0) data += std::pow(qhat.q[i][h], gamma + 1.0);
    }
    total += w[i] * (model - (gamma + 1.0) / gamma * cross + data / gamma);
  }
  return total;
}

// gamma -> 0 limit of the WDPD: sum_i w_i sum_cells qhat ln(qhat / p),
// with 0 ln 0 = 0.  +inf sentinel when qhat > 0 meets p = 0.
inline double kl_divergence(const ModelParams& params, const TestPlan& plan,
                            const FailureCounts& counts) {
  plan.validate();
  counts.validate(plan);
  const auto qhat = empirical_probs(counts, plan);
  const auto w = plan.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const double q = qhat.q[i][h];
      if (q > 0.0) {
        if (cells[h] <= 0.0) return std::numeric_limits<double>::infinity();
        total += w[i] * q * std::log(q / cells[h]);
      }
    }
  }
  return total;
}

// Maximizer objective B^w_gamma; its arg max is the WMDPDE.
inline double bw_objective(const ModelParams& params, const TestPlan& plan,
                           const FailureCounts& counts, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("bw_objective: gamma must be > 0");
  plan.validate();
  counts.validate(plan);
  const auto qhat = empirical_probs(counts, plan);
  return detail::bw_objective_t<double>(params, plan, qhat, gamma);
}

inline Eigen::Vector4d bw_gradient(const ModelParams& params, const TestPlan& plan,
                                   const FailureCounts& counts, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("bw_gradient: gamma must be > 0");
  plan.validate();
  counts.validate(plan);
  const auto qhat = empirical_probs(counts, plan);
  const auto b = detail::bw_objective_t<Dual4>(params, plan, qhat, gamma);
  return Eigen::Vector4d(b.d[0], b.d[1], b.d[2], b.d[3]);
}

// Score of the multinomial log-likelihood, sum_i sum_h n_ih u_ih / p_ih.
inline Eigen::Vector4d log_likelihood_gradient(const ModelParams& params,
                                               const TestPlan& plan,
                                               const FailureCounts& counts) {
  Eigen::Vector4d g = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = detail::cell_probs_t<Dual4>(params, plan.groups[i]);
    const auto n = counts.flat_group(i);
    for (std::size_t h = 0; h < cells.size(); ++h) {
      if (n[h] > 0.0) {
        const double p = std::max(cells[h].v, kProbFloor);
        for (int j = 0; j < 4; ++j) g[j] += n[h] * cells[h].d[j] / p;
      }
    }
  }
  return g;
}

}  // namespace nosd
