#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nosd/divergence.hpp"

namespace nosd {

struct FitResult {
  ModelParams params;
  double objective = 0.0;  // log-likelihood for the MLE, WDPD for the WMDPDE
  int iterations = 0;
  bool converged = false;
  double gamma = 0.0;  // 0 marks the MLE
};

struct SandwichCovariance {
  Eigen::Matrix4d Q;
  Eigen::Matrix4d R;
  Eigen::Matrix4d cov;  // Q^-1 R Q^-1 / G
};

namespace detail {

// Golden-section maximization on [lo, hi].
template <class F>
double golden_section_max(F&& f, double lo, double hi, double xtol = 1e-9) {
  constexpr double kInvPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > xtol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Cyclic coordinate ascent: each coordinate is maximized by golden
// section on an adaptive bracket (half-width 0.5, doubled while an edge
// beats the current point, capped at 8).
struct CoordinateAscent {
  double tol = 1e-6;
  int max_sweeps = 500;

  template <class F>
  FitResult run(F&& objective, const ModelParams& init) const {
    ModelParams x = init;
    double fx = objective(x);
    int sweeps = 0;
    bool converged = false;
    for (; sweeps < max_sweeps; ++sweeps) {
      double max_change = 0.0;
      for (int j = 0; j < 4; ++j) {
        const auto slice = [&](double v) {
          ModelParams y = x;
          y[j] = v;
          return objective(y);
        };
        double h = 0.5;
        while (h < 8.0 && (slice(x[j] - h) > fx || slice(x[j] + h) > fx)) h *= 2.0;
        const double cand = golden_section_max(slice, x[j] - h, x[j] + h);
        const double fcand = slice(cand);
        if (fcand > fx) {
          max_change = std::max(max_change, std::abs(cand - x[j]));
          x[j] = cand;
          fx = fcand;
        }
      }
      if (max_change < tol) {
        converged = true;
        ++sweeps;
        break;
      }
    }
    FitResult r;
    r.params = x;
    r.objective = fx;
    r.iterations = sweeps;
    r.converged = converged;
    return r;
  }
};

// Damped Newton polish on a smooth objective with analytic gradient;
// drives the estimating equations to numerical zero after coordinate
// descent has located the basin.  Only ascent steps are accepted.
template <class F, class G>
void newton_polish(F&& objective, G&& gradient, ModelParams& x, double& fx,
                   int& iterations, double grad_tol = 1e-8, int max_iter = 60) {
  const double fd_h = 1e-5;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::Vector4d g;
    try {
      g = gradient(x);
    } catch (const std::exception&) {
      return;
    }
    if (!g.allFinite()) return;
    if (g.norm() < grad_tol) return;
    Eigen::Matrix4d H;
    for (int j = 0; j < 4; ++j) {
      ModelParams xp = x, xm = x;
      xp[j] += fd_h;
      xm[j] -= fd_h;
      Eigen::Vector4d gp, gm;
      try {
        gp = gradient(xp);
        gm = gradient(xm);
      } catch (const std::exception&) {
        return;
      }
      H.col(j) = (gp - gm) / (2.0 * fd_h);
    }
    H = 0.5 * (H + H.transpose()).eval();
    Eigen::Vector4d step = -H.fullPivLu().solve(g);
    if (!step.allFinite() || step.dot(g) <= 0.0) step = g;  // fall back to ascent
    double scale = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      ModelParams cand = x;
      for (int j = 0; j < 4; ++j) cand[j] += scale * step[j];
      const double fc = objective(cand);
      if (std::isfinite(fc) && fc >= fx) {
        x = cand;
        fx = fc;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    ++iterations;
    if (!accepted) return;
  }
}

inline ModelParams grid_search_init(const std::function<double(const ModelParams&)>& objective) {
  static const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  ModelParams best;
  double fbest = -std::numeric_limits<double>::infinity();
  for (double a1 : grid)
    for (double b1 : grid)
      for (double a2 : grid)
        for (double b2 : grid) {
          const ModelParams p{a1, b1, a2, b2};
          const double f = objective(p);
          if (f > fbest) {
            fbest = f;
            best = p;
          }
        }
  return best;
}

// Evaluation failures (overflowing links) count as -inf so the search
// stays inside the parameter domain.
template <class F>
auto guard(F&& f) {
  return [f = std::forward<F>(f)](const ModelParams& p) -> double {
    try {
      const double v = f(p);
      return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v;
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };
}

}  // namespace detail

// Maximum likelihood estimate by cyclic coordinate ascent from `init`,
// finished with a Newton polish on the score.
inline FitResult fit_mle(const TestPlan& plan, const FailureCounts& counts,
                         std::optional<ModelParams> init = std::nullopt) {
  plan.validate();
  counts.validate(plan);
  if (counts.total_failures() <= 0)
    throw std::invalid_argument("fit_mle: estimation needs at least one failure");
  const auto obj = detail::guard(
      [&](const ModelParams& p) { return log_likelihood(p, plan, counts); });
  const ModelParams x0 = init ? *init : detail::grid_search_init(obj);
  detail::CoordinateAscent ascent;
  FitResult r = ascent.run(obj, x0);
  detail::newton_polish(
      obj, [&](const ModelParams& p) { return log_likelihood_gradient(p, plan, counts); },
      r.params, r.objective, r.iterations);
  r.gamma = 0.0;
  return r;
}

// Weighted minimum density power divergence estimate; same scheme on
// -WDPD, equivalently maximizing B^w_gamma.
inline FitResult fit_wmdpde(const TestPlan& plan, const FailureCounts& counts,
                            double gamma, std::optional<ModelParams> init = std::nullopt) {
  if (!(gamma > 0.0)) throw std::invalid_argument("fit_wmdpde: gamma must be > 0");
  plan.validate();
  counts.validate(plan);
  if (counts.total_failures() <= 0)
    throw std::invalid_argument("fit_wmdpde: estimation needs at least one failure");
  const auto obj =
      detail::guard([&](const ModelParams& p) { return -wdpd(p, plan, counts, gamma); });
  const ModelParams x0 = init ? *init : detail::grid_search_init(obj);
  detail::CoordinateAscent ascent;
  FitResult r = ascent.run(obj, x0);
  detail::newton_polish(
      obj, [&](const ModelParams& p) { return bw_gradient(p, plan, counts, gamma); },
      r.params, r.objective, r.iterations, 1e-9);
  r.objective = -r.objective;  // report the WDPD value itself
  r.gamma = gamma;
  return r;
}

// Left-hand side of the WMDPDE estimating equations,
//   sum_i g_i sum_h p_h^{gamma-1} (p_h - qhat_h) dp_h/dLambda,
// which vanishes at an interior optimum.
inline Eigen::Vector4d estimating_equation_residual(const ModelParams& params,
                                                    const TestPlan& plan,
                                                    const FailureCounts& counts,
                                                    double gamma) {
  const auto qhat = empirical_probs(counts, plan);
  Eigen::Vector4d res = Eigen::Vector4d::Zero();
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    const auto U = cell_prob_gradient(params, plan.groups[i]);
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const double w = detail::pow_gamma(cells[h], gamma - 1.0) * (cells[h] - qhat.q[i][h]);
      res += plan.groups[i].devices * w * U.col(h);
    }
  }
  return res;
}

// Q_gamma, R_gamma and the asymptotic covariance Q^-1 R Q^-1 / G of the
// WMDPDE.  R is the variance of the per-device DPD score under the
// multinomial cell model.
inline SandwichCovariance sandwich_covariance(const ModelParams& params,
                                              const TestPlan& plan, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("sandwich_covariance: gamma must be >= 0");
  plan.validate();
  const auto w = plan.weights();
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();
  Eigen::Matrix4d R = Eigen::Matrix4d::Zero();
  for (std::size_t i = 0; i < plan.groups.size(); ++i) {
    const auto cells = cell_probabilities(params, plan.groups[i]).flat();
    const auto U = cell_prob_gradient(params, plan.groups[i]);
    Eigen::Vector4d xi = Eigen::Vector4d::Zero();
    for (std::size_t h = 0; h < cells.size(); ++h) {
      const Eigen::Vector4d u = U.col(h);
      Q += w[i] * detail::pow_gamma(cells[h], gamma - 1.0) * (u * u.transpose());
      R += w[i] * detail::pow_gamma(cells[h], 2.0 * gamma - 1.0) * (u * u.transpose());
      xi += detail::pow_gamma(cells[h], gamma) * u;
    }
    R -= w[i] * (xi * xi.transpose());
  }
  const Eigen::JacobiSVD<Eigen::Matrix4d> svd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double cond = svd.singularValues()(0) / svd.singularValues()(3);
  if (!std::isfinite(cond) || cond > 1e12) {
    std::ostringstream msg;
    msg << "sandwich_covariance: Q_gamma is numerically singular (condition number "
        << cond << ")";
    throw std::runtime_error(msg.str());
  }
  SandwichCovariance out;
  out.Q = Q;
  out.R = R;
  const Eigen::Matrix4d Qi = Q.inverse();
  out.cov = Qi * R * Qi / plan.total_devices();
  out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
  return out;
}

// Inverse standard normal CDF (Acklam's rational approximation with one
// Halley refinement; good to ~1e-15).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("normal_quantile: p in (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // one step of Halley's method on erfc
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

struct Interval {
  double lo = 0.0, hi = 0.0;
  double width() const { return hi - lo; }
};

// Wald intervals estimate +/- z * sqrt(cov_jj).
inline std::array<Interval, 4> wald_ci(const FitResult& fit, const SandwichCovariance& sw,
                                       double level) {
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("wald_ci: level must be in (0,1)");
  const double z = normal_quantile(0.5 * (1.0 + level));
  std::array<Interval, 4> out;
  for (int j = 0; j < 4; ++j) {
    const double se = std::sqrt(std::max(0.0, sw.cov(j, j)));
    out[j] = {fit.params[j] - z * se, fit.params[j] + z * se};
  }
  return out;
}

struct TuningRow {
  double gamma = 0.0;
  bool ok = false;
  double phi = 0.0;
  double dpd = 0.0;
  double trace = 0.0;
  ModelParams fit;
  std::string note;
};

struct TuningResult {
  double gamma_star = 0.0;
  std::vector<TuningRow> rows;
};

// Warwick-Jones composite objective over a gamma grid:
//   Phi_gamma = C1 * D^w_gamma(fit) + C2 * tr(Q^-1 R Q^-1),
// both matrices evaluated at the gamma-specific WMDPDE.
inline TuningResult select_tuning(const TestPlan& plan, const FailureCounts& counts,
                                  const std::vector<double>& grid, double c1, double c2) {
  if (grid.empty()) throw std::invalid_argument("select_tuning: empty gamma grid");
  if (c1 < 0.0 || c2 < 0.0 || std::abs(c1 + c2 - 1.0) > 1e-9)
    throw std::invalid_argument("select_tuning: need C1, C2 >= 0 with C1 + C2 = 1");
  for (double g : grid)
    if (!(g > 0.0 && g <= 1.0))
      throw std::invalid_argument("select_tuning: grid values must lie in (0, 1]");

  TuningResult out;
  double best = std::numeric_limits<double>::infinity();
  for (double gamma : grid) {
    TuningRow row;
    row.gamma = gamma;
    try {
      const FitResult fr = fit_wmdpde(plan, counts, gamma);
      const auto sw = sandwich_covariance(fr.params, plan, gamma);
      const Eigen::Matrix4d Qi = sw.Q.inverse();
      row.fit = fr.params;
      row.dpd = fr.objective;
      row.trace = (Qi * sw.R * Qi).trace();
      row.phi = c1 * row.dpd + c2 * row.trace;
      row.ok = std::isfinite(row.phi);
      if (!row.ok) row.note = "non-finite objective";
    } catch (const std::exception& e) {
      row.ok = false;
      row.note = e.what();
    }
    if (row.ok && row.phi < best) {
      best = row.phi;
      out.gamma_star = row.gamma;
    }
    out.rows.push_back(std::move(row));
  }
  if (!std::isfinite(best))
    throw std::runtime_error("select_tuning: every gamma on the grid failed");
  return out;
}

}  // namespace nosd
