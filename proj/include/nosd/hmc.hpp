#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "nosd/fit.hpp"
#include "nosd/model.hpp"
#include "nosd/rng.hpp"

namespace nosd {

struct HmcConfig {
  double step_size = 0.05;
  int n_leapfrog = 5;
  int n_samples = 1200;
  int burn_in = 200;
  std::array<double, 4> mass_diag = {20.0, 20.0, 20.0, 20.0};  // 1 / v
  int n_chains = 2;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(step_size > 0.0)) throw std::invalid_argument("HmcConfig: step_size must be > 0");
    if (n_leapfrog < 1) throw std::invalid_argument("HmcConfig: n_leapfrog must be >= 1");
    if (n_samples < 1) throw std::invalid_argument("HmcConfig: n_samples must be >= 1");
    if (burn_in < 0 || burn_in >= n_samples)
      throw std::invalid_argument("HmcConfig: burn_in must be in [0, n_samples)");
    if (n_chains < 1) throw std::invalid_argument("HmcConfig: n_chains must be >= 1");
    for (double m : mass_diag)
      if (!(m > 0.0)) throw std::invalid_argument("HmcConfig: mass entries must be > 0");
  }
};

struct PosteriorChains {
  std::vector<std::vector<std::array<double, 4>>> draws;  // [chain][iter][coord]
  std::vector<double> accept_rate;
  std::array<double, 4> rhat = {1.0, 1.0, 1.0, 1.0};
  bool low_acceptance = false;

  std::size_t total_draws() const {
    std::size_t n = 0;
    for (const auto& c : draws) n += c.size();
    return n;
  }
  // iterate over all post-burn-in draws of all chains
  template <class F>
  void for_each(F&& f) const {
    for (const auto& chain : draws)
      for (const auto& x : chain) f(x);
  }
};

using LogDensityFn = std::function<double(const ModelParams&)>;
using GradientFn = std::function<Eigen::Vector4d(const ModelParams&)>;

// One leapfrog trajectory: half kick, L alternating drifts and kicks,
// half kick.  grad_fn is the gradient of the log target (= -grad U).
inline std::pair<std::array<double, 4>, std::array<double, 4>> leapfrog(
    const std::array<double, 4>& position, const std::array<double, 4>& momentum,
    const GradientFn& grad_fn, double eps, int n_steps,
    const std::array<double, 4>& mass_diag) {
  if (!(eps > 0.0) || n_steps < 1) throw std::invalid_argument("leapfrog: bad eps or step count");
  std::array<double, 4> q = position, p = momentum;
  Eigen::Vector4d g = grad_fn(ModelParams::from_array(q));
  if (!g.allFinite()) throw std::domain_error("leapfrog: non-finite gradient at start");
  for (int j = 0; j < 4; ++j) p[j] += 0.5 * eps * g[j];
  for (int step = 0; step < n_steps; ++step) {
    for (int j = 0; j < 4; ++j) q[j] += eps * p[j] / mass_diag[j];
    g = grad_fn(ModelParams::from_array(q));
    if (!g.allFinite()) {
      // treat as a divergent trajectory; caller rejects via -inf density
      for (int j = 0; j < 4; ++j) g[j] = 0.0;
    }
    if (step + 1 < n_steps)
      for (int j = 0; j < 4; ++j) p[j] += eps * g[j];
  }
  for (int j = 0; j < 4; ++j) p[j] += 0.5 * eps * g[j];
  return {q, p};
}

namespace detail {

inline double kinetic(const std::array<double, 4>& p, const std::array<double, 4>& mass) {
  double k = 0.0;
  for (int j = 0; j < 4; ++j) k += 0.5 * p[j] * p[j] / mass[j];
  return k;
}

inline std::array<double, 4> split_rhat(
    const std::vector<std::vector<std::array<double, 4>>>& chains) {
  std::array<double, 4> rhat = {1.0, 1.0, 1.0, 1.0};
  if (chains.empty() || chains.front().size() < 4) return rhat;
  const std::size_t n = chains.front().size() / 2;
  std::vector<std::pair<std::size_t, std::size_t>> halves;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    halves.emplace_back(c, 0);
    halves.emplace_back(c, n);
  }
  for (int j = 0; j < 4; ++j) {
    std::vector<double> means, vars;
    for (const auto& [c, off] : halves) {
      double m = 0.0;
      for (std::size_t t = 0; t < n; ++t) m += chains[c][off + t][j];
      m /= n;
      double v = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double d = chains[c][off + t][j] - m;
        v += d * d;
      }
      v /= (n - 1);
      means.push_back(m);
      vars.push_back(v);
    }
    const std::size_t m_count = means.size();
    double grand = 0.0;
    for (double m : means) grand += m;
    grand /= m_count;
    double B = 0.0;
    for (double m : means) B += (m - grand) * (m - grand);
    B *= static_cast<double>(n) / (m_count - 1);
    double W = 0.0;
    for (double v : vars) W += v;
    W /= m_count;
    if (W <= 0.0) {
      rhat[j] = 1.0;  // constant chains
    } else {
      const double var_plus = (n - 1.0) / n * W + B / n;
      rhat[j] = std::sqrt(var_plus / W);
    }
  }
  return rhat;
}

}  // namespace detail

// Hamiltonian Monte Carlo with diagonal mass matrix and Metropolis
// correction.  Deterministic given the seed; chains use derived seeds.
inline PosteriorChains sample(const LogDensityFn& log_post, const GradientFn& grad,
                              const HmcConfig& config, const ModelParams& init) {
  config.validate();
  const double lp0 = log_post(init);
  if (!std::isfinite(lp0))
    throw std::invalid_argument("hmc::sample: log density not finite at the initial point");

  PosteriorChains out;
  out.draws.resize(config.n_chains);
  out.accept_rate.resize(config.n_chains, 0.0);
  for (int c = 0; c < config.n_chains; ++c) {
    Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(c));
    std::array<double, 4> x = init.to_array();
    double lp = lp0;
    int accepted = 0;
    auto& chain = out.draws[c];
    chain.reserve(config.n_samples - config.burn_in);
    for (int t = 0; t < config.n_samples; ++t) {
      std::array<double, 4> phi;
      for (int j = 0; j < 4; ++j) phi[j] = rng.normal() * std::sqrt(config.mass_diag[j]);
      std::array<double, 4> q = x, p = phi;
      double lp_new = -std::numeric_limits<double>::infinity();
      double dH = -std::numeric_limits<double>::infinity();
      try {
        std::tie(q, p) = leapfrog(x, phi, grad, config.step_size, config.n_leapfrog,
                                  config.mass_diag);
        lp_new = log_post(ModelParams::from_array(q));
        dH = (lp_new - lp) + (detail::kinetic(phi, config.mass_diag) -
                              detail::kinetic(p, config.mass_diag));
        if (!std::isfinite(dH) || std::abs(dH) > 1000.0)
          dH = -std::numeric_limits<double>::infinity();  // divergent: reject
      } catch (const std::exception&) {
        dH = -std::numeric_limits<double>::infinity();
      }
      if (std::log(std::max(rng.uniform(), 1e-300)) < dH) {
        x = q;
        lp = lp_new;
        ++accepted;
      }
      if (t >= config.burn_in) chain.push_back(x);
    }
    out.accept_rate[c] = static_cast<double>(accepted) / config.n_samples;
  }
  out.rhat = detail::split_rhat(out.draws);
  double mean_acc = 0.0;
  for (double a : out.accept_rate) mean_acc += a;
  out.low_acceptance = (mean_acc / config.n_chains) < 0.01;
  return out;
}

// Posterior mean across all chains: the (weighted robust) Bayes estimate.
inline ModelParams posterior_mean(const PosteriorChains& chains) {
  if (chains.total_draws() == 0)
    throw std::invalid_argument("posterior_mean: no post-burn-in draws");
  std::array<double, 4> acc{};
  std::size_t n = 0;
  chains.for_each([&](const std::array<double, 4>& x) {
    for (int j = 0; j < 4; ++j) acc[j] += x[j];
    ++n;
  });
  for (double& v : acc) v /= static_cast<double>(n);
  return ModelParams::from_array(acc);
}

// Shortest interval containing ceil(level * n) sorted draws, per coordinate.
inline std::array<Interval, 4> hpd_interval(const PosteriorChains& chains, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("hpd_interval: level must be in (0,1)");
  if (chains.total_draws() == 0)
    throw std::invalid_argument("hpd_interval: no post-burn-in draws");
  std::array<Interval, 4> out;
  for (int j = 0; j < 4; ++j) {
    std::vector<double> v;
    v.reserve(chains.total_draws());
    chains.for_each([&](const std::array<double, 4>& x) { v.push_back(x[j]); });
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    std::size_t m = static_cast<std::size_t>(std::ceil(level * n));
    if (m < 1) m = 1;
    if (m > n) m = n;
    std::size_t best = 0;
    double width = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + m <= n; ++i) {
      const double w = v[i + m - 1] - v[i];
      if (w < width) {
        width = w;
        best = i;
      }
    }
    out[j] = {v[best], v[best + m - 1]};
  }
  return out;
}

struct Diagnostics {
  std::vector<double> accept_rate;
  std::array<double, 4> rhat;
};

inline Diagnostics diagnostics(const PosteriorChains& chains) {
  return {chains.accept_rate, chains.rhat};
}

}  // namespace nosd
