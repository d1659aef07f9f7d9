#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "nosd/hmc.hpp"
#include "nosd/prior.hpp"

namespace nosd {

// Point null Lambda0 tested through a spherical epsilon-neighbourhood in
// parameter space.  rho0 empty means the prior odds are estimated
// empirically from prior-only draws.
struct HypothesisSpec {
  ModelParams lambda0;
  double radius = 0.0;
  std::optional<double> rho0;

  void validate() const {
    if (!(radius > 0.0)) throw std::invalid_argument("HypothesisSpec: radius must be > 0");
    if (rho0 && !(*rho0 > 0.0 && *rho0 < 1.0))
      throw std::invalid_argument("HypothesisSpec: rho0 must be in (0,1)");
  }
  bool in_ball(const std::array<double, 4>& x) const {
    double d2 = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double d = x[j] - lambda0[j];
      d2 += d * d;
    }
    return d2 <= radius * radius;
  }
};

struct BayesFactorResult {
  double prior_odds = 0.0;
  double posterior_odds = 0.0;
  double bf01 = 0.0;
  std::string category;
  PosteriorChains posterior_chains;
  PosteriorChains prior_chains;
};

// Kass-Raftery style bands, closed on the left edge.
inline std::string interpret_bf(double bf01) {
  if (!(bf01 > 0.0)) throw std::invalid_argument("interpret_bf: bf01 must be > 0");
  if (bf01 < 1.0) return "Negative";
  if (bf01 < 3.0) return "Not worth more than a bare mention";
  if (bf01 < 20.0) return "Positive";
  if (bf01 < 150.0) return "Strong";
  return "Very Strong";
}

// Empirical Bayes factor: the ratio of ball/complement odds under the
// pseudo-posterior draws to the same odds under prior-only draws.  The
// data-dependent priors are unnormalized, so prior draws come from the
// same HMC kernel run on the log prior alone.
inline BayesFactorResult bayes_factor(const TestPlan& plan, const FailureCounts& counts,
                                      double gamma, const PriorSpec& prior,
                                      const HypothesisSpec& hyp, const HmcConfig& mc) {
  hyp.validate();
  const PseudoPosterior post(plan, counts, gamma, prior);

  BayesFactorResult out;
  out.posterior_chains = sample([&](const ModelParams& p) { return post.value(p); },
                                [&](const ModelParams& p) { return post.gradient(p); },
                                mc, hyp.lambda0);
  HmcConfig prior_mc = mc;
  prior_mc.seed = mc.seed + 0x51ed270b2d4b1337ULL;
  out.prior_chains = sample([&](const ModelParams& p) { return post.log_prior(p); },
                            [&](const ModelParams& p) { return post.log_prior_gradient(p); },
                            prior_mc, hyp.lambda0);

  const auto ball_odds = [&](const PosteriorChains& chains, const char* which) {
    std::size_t in = 0, total = 0;
    chains.for_each([&](const std::array<double, 4>& x) {
      ++total;
      if (hyp.in_ball(x)) ++in;
    });
    if (in == 0 || in == total)
      throw std::runtime_error(std::string("bayes_factor: ") + which +
                               " draws give an empty hypothesis region; enlarge the "
                               "radius or draw more samples");
    return static_cast<double>(in) / static_cast<double>(total - in);
  };

  out.posterior_odds = ball_odds(out.posterior_chains, "posterior");
  out.prior_odds = hyp.rho0 ? *hyp.rho0 / (1.0 - *hyp.rho0)
                            : ball_odds(out.prior_chains, "prior");
  out.bf01 = out.posterior_odds / out.prior_odds;
  out.category = interpret_bf(out.bf01);
  return out;
}

struct GofResult {
  double t_obs = 0.0;
  double p_value = 0.0;
  int n_boot = 0;
  int n_failed = 0;
  FitResult mle;
};

// Distance statistic of the bootstrap goodness-of-fit test:
// max over groups and cells of |qtilde - p(params)|.
inline double gof_statistic(const ModelParams& params, const TestPlan& plan,
                            const FailureCounts& counts) {
  const auto qt = smoothed_probs(counts, plan);
  double t = 0.0;
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    for (std::size_t h = 0; h < cells.size(); ++h)
      t = std::max(t, std::abs(qt.q[i][h] - cells[h]));
  }
  return t;
}

// Parametric bootstrap: simulate at the MLE, refit from a warm start,
// recompute the statistic on each replicate.
inline GofResult gof_bootstrap(const TestPlan& plan, const FailureCounts& counts,
                               int n_boot, std::uint64_t seed,
                               std::optional<ModelParams> init = std::nullopt) {
  if (n_boot < 100) throw std::invalid_argument("gof_bootstrap: n_boot must be >= 100");
  GofResult out;
  out.n_boot = n_boot;
  out.mle = fit_mle(plan, counts, init);
  out.t_obs = gof_statistic(out.mle.params, plan, counts);
  int exceed = 0, ok = 0;
  for (int b = 0; b < n_boot; ++b) {
    const auto boot = simulate_counts(out.mle.params, plan, seed + static_cast<std::uint64_t>(b));
    try {
      const auto refit = fit_mle(plan, boot, out.mle.params);
      const double t_star = gof_statistic(refit.params, plan, boot);
      ++ok;
      if (t_star >= out.t_obs) ++exceed;
    } catch (const std::exception&) {
      ++out.n_failed;
    }
  }
  if (ok == 0) throw std::runtime_error("gof_bootstrap: every bootstrap refit failed");
  out.p_value = static_cast<double>(exceed) / ok;
  return out;
}

// An estimator maps (plan, counts, warm start) to a parameter estimate.
using EstimatorFn = std::function<ModelParams(const TestPlan&, const FailureCounts&,
                                              std::optional<ModelParams>)>;

struct EstimatorSpec {
  enum class Kind { mle, wmdpde } kind = Kind::mle;
  double gamma = 0.0;

  ModelParams fit(const TestPlan& plan, const FailureCounts& counts,
                  std::optional<ModelParams> init = std::nullopt) const {
    return kind == Kind::mle ? fit_mle(plan, counts, init).params
                             : fit_wmdpde(plan, counts, gamma, init).params;
  }
  EstimatorFn fn() const {
    return [spec = *this](const TestPlan& p, const FailureCounts& c,
                          std::optional<ModelParams> i) { return spec.fit(p, c, i); };
  }
};

struct BootstrapBiasRmse {
  std::array<double, 4> bias{};
  std::array<double, 4> rmse{};
  int n_used = 0;
  int n_failed = 0;
  ModelParams point;
};

// Simulate at the point estimate and re-estimate per replicate;
// bias = mean(Lambda*) - Lambda_hat, rmse about Lambda_hat.  Replicate
// refits warm-start from the original estimate.
inline BootstrapBiasRmse bootstrap_bias_rmse(const TestPlan& plan,
                                             const FailureCounts& counts,
                                             const EstimatorFn& estimator, int n_boot,
                                             std::uint64_t seed,
                                             std::optional<ModelParams> init = std::nullopt) {
  if (n_boot < 100) throw std::invalid_argument("bootstrap_bias_rmse: n_boot must be >= 100");
  BootstrapBiasRmse out;
  out.point = estimator(plan, counts, init);
  std::array<double, 4> sum{}, sumsq{};
  for (int b = 0; b < n_boot; ++b) {
    const auto boot = simulate_counts(out.point, plan, seed + static_cast<std::uint64_t>(b));
    try {
      const auto refit = estimator(plan, boot, out.point);
      for (int j = 0; j < 4; ++j) {
        const double d = refit[j] - out.point[j];
        sum[j] += d;
        sumsq[j] += d * d;
      }
      ++out.n_used;
    } catch (const std::exception&) {
      ++out.n_failed;
    }
  }
  if (out.n_used == 0)
    throw std::runtime_error("bootstrap_bias_rmse: every bootstrap refit failed");
  for (int j = 0; j < 4; ++j) {
    out.bias[j] = sum[j] / out.n_used;
    out.rmse[j] = std::sqrt(sumsq[j] / out.n_used);
  }
  return out;
}

}  // namespace nosd
