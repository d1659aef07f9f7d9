#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "nosd/divergence.hpp"

namespace nosd {

enum class PriorKind { normal, dirichlet };

// Data-driven prior configuration.  posterior_scale multiplies B^w_gamma
// in the pseudo-posterior exponent; 1 is the literal definition, G
// recovers the convention in which the data keep O(G) influence.
struct PriorSpec {
  PriorKind kind = PriorKind::normal;
  double sigma2_p = 0.06;       // Dirichlet only
  double posterior_scale = 1.0;
};

struct DirichletHyper {
  std::vector<double> beta0;                            // per group
  std::vector<std::vector<std::array<double, 2>>> beta; // per group, interval, cause
  bool clamped = false;
};

namespace detail {

// Normal data-driven prior: -IL * ln sum_(failure cells) (p - qtilde)^2.
// The survival cells are excluded from the residual sum.
template <class S>
S log_normal_prior_t(const ModelParams& params, const TestPlan& plan,
                     const EmpiricalProbs& qtilde) {
  using nosd::log;
  using std::log;
  const double IL = static_cast<double>(plan.groups.size()) * plan.intervals();
  S rss(0.0);
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probs_t<S>(params, plan.groups[i]);
    for (std::size_t h = 0; h + 1 < cells.size(); ++h) {
      const S r = cells[h] - S(qtilde.q[i][h]);
      rss += r * r;
    }
  }
  if (scalar_value(rss) <= 0.0) return S(-std::numeric_limits<double>::infinity());
  return S(-IL) * log(rss);
}

template <class S>
S log_dirichlet_prior_t(const ModelParams& params, const TestPlan& plan,
                        const DirichletHyper& hyper) {
  using nosd::log;
  using std::log;
  S total(0.0);
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probs_t<S>(params, plan.groups[i]);
    const int L = plan.groups[i].intervals();
    for (int l = 0; l < L; ++l)
      for (int r = 0; r < 2; ++r)
        total += S(hyper.beta[i][l][r] - 1.0) * log(clamp_prob(cells[2 * l + r]));
    total += S(hyper.beta0[i] - 1.0) * log(clamp_prob(cells[2 * L]));
  }
  return total;
}

}  // namespace detail

inline double log_normal_prior(const ModelParams& params, const TestPlan& plan,
                               const FailureCounts& counts) {
  const auto qt = smoothed_probs(counts, plan);
  return detail::log_normal_prior_t<double>(params, plan, qt);
}

inline Eigen::Vector4d log_normal_prior_gradient(const ModelParams& params,
                                                 const TestPlan& plan,
                                                 const FailureCounts& counts) {
  const auto qt = smoothed_probs(counts, plan);
  const auto v = detail::log_normal_prior_t<Dual4>(params, plan, qt);
  return Eigen::Vector4d(v.d[0], v.d[1], v.d[2], v.d[3]);
}

// Hyperparameters matching the Dirichlet moments to the smoothed
// frequencies: E(cell) = qtilde and Var(survival) = sigma2_p.
inline DirichletHyper dirichlet_hyperparams(const EmpiricalProbs& qtilde, double sigma2_p) {
  DirichletHyper out;
  for (const auto& q : qtilde.q) {
    const double q0 = q.back();
    const double bracket = q0 * (1.0 - q0) / sigma2_p - 1.0;
    if (!(sigma2_p > 0.0) || bracket <= 0.0)
      throw std::invalid_argument(
          "dirichlet_hyperparams: sigma2_p must lie in (0, q0(1-q0)) for every group");
    const int L = static_cast<int>((q.size() - 1) / 2);
    std::vector<std::array<double, 2>> beta(L);
    double sum = 0.0;
    for (int l = 0; l < L; ++l)
      for (int r = 0; r < 2; ++r) {
        double b = q[2 * l + r] * bracket;
        if (b <= 0.0) {
          b = 1e-4;
          out.clamped = true;
        }
        beta[l][r] = b;
        sum += b;
      }
    double b0 = bracket - sum;
    if (b0 <= 0.0) {
      b0 = 1e-4;
      out.clamped = true;
    }
    out.beta0.push_back(b0);
    out.beta.push_back(std::move(beta));
  }
  return out;
}

inline double log_dirichlet_prior(const ModelParams& params, const TestPlan& plan,
                                  const DirichletHyper& hyper) {
  return detail::log_dirichlet_prior_t<double>(params, plan, hyper);
}

inline Eigen::Vector4d log_dirichlet_prior_gradient(const ModelParams& params,
                                                    const TestPlan& plan,
                                                    const DirichletHyper& hyper) {
  const auto v = detail::log_dirichlet_prior_t<Dual4>(params, plan, hyper);
  return Eigen::Vector4d(v.d[0], v.d[1], v.d[2], v.d[3]);
}

// Unnormalized log pseudo-posterior
//   posterior_scale * B^w_gamma(Lambda) + log prior(Lambda)
// with everything data-dependent precomputed once.  value() and
// gradient() are pure and reentrant, as the samplers require.
class PseudoPosterior {
 public:
  PseudoPosterior(const TestPlan& plan, const FailureCounts& counts, double gamma,
                  const PriorSpec& prior)
      : plan_(plan), gamma_(gamma), spec_(prior) {
    if (!(gamma > 0.0)) throw std::invalid_argument("PseudoPosterior: gamma must be > 0");
    plan_.validate();
    counts.validate(plan_);
    qhat_ = empirical_probs(counts, plan_);
    qtilde_ = smoothed_probs(counts, plan_);
    if (spec_.kind == PriorKind::dirichlet)
      hyper_ = dirichlet_hyperparams(qtilde_, spec_.sigma2_p);
  }

  double value(const ModelParams& params) const { return eval<double>(params); }

  Eigen::Vector4d gradient(const ModelParams& params) const {
    const auto v = eval<Dual4>(params);
    return Eigen::Vector4d(v.d[0], v.d[1], v.d[2], v.d[3]);
  }

  double gamma() const { return gamma_; }
  const PriorSpec& spec() const { return spec_; }
  const TestPlan& plan() const { return plan_; }

  // log prior alone, for prior-only sampling
  double log_prior(const ModelParams& params) const { return eval_prior<double>(params); }
  Eigen::Vector4d log_prior_gradient(const ModelParams& params) const {
    const auto v = eval_prior<Dual4>(params);
    return Eigen::Vector4d(v.d[0], v.d[1], v.d[2], v.d[3]);
  }

 private:
  template <class S>
  S eval_prior(const ModelParams& params) const {
    if (spec_.kind == PriorKind::normal)
      return detail::log_normal_prior_t<S>(params, plan_, qtilde_);
    return detail::log_dirichlet_prior_t<S>(params, plan_, hyper_);
  }

  template <class S>
  S eval(const ModelParams& params) const {
    const S b = detail::bw_objective_t<S>(params, plan_, qhat_, gamma_);
    return S(spec_.posterior_scale) * b + eval_prior<S>(params);
  }

  TestPlan plan_;
  double gamma_;
  PriorSpec spec_;
  EmpiricalProbs qhat_, qtilde_;
  DirichletHyper hyper_;
};

inline double log_pseudo_posterior(const ModelParams& params, const TestPlan& plan,
                                   const FailureCounts& counts, double gamma,
                                   const PriorSpec& prior) {
  return PseudoPosterior(plan, counts, gamma, prior).value(params);
}

inline Eigen::Vector4d log_pseudo_posterior_gradient(const ModelParams& params,
                                                     const TestPlan& plan,
                                                     const FailureCounts& counts,
                                                     double gamma, const PriorSpec& prior) {
  return PseudoPosterior(plan, counts, gamma, prior).gradient(params);
}

}  // namespace nosd
