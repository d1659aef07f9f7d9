#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "nosd/dual.hpp"

namespace nosd {

// Log-linear link coefficients Lambda = (a1, b1, a2, b2) for the two
// competing causes: alpha_r = exp(a_r * s), theta_r = exp(b_r * s).
struct ModelParams {
  double a1 = 0.0, b1 = 0.0, a2 = 0.0, b2 = 0.0;

  double operator[](int j) const {
    switch (j) {
      case 0: return a1;
      case 1: return b1;
      case 2: return a2;
      default: return b2;
    }
  }
  double& operator[](int j) {
    switch (j) {
      case 0: return a1;
      case 1: return b1;
      case 2: return a2;
      default: return b2;
    }
  }
  std::array<double, 4> to_array() const { return {a1, b1, a2, b2}; }
  static ModelParams from_array(const std::array<double, 4>& x) {
    return {x[0], x[1], x[2], x[3]};
  }
  bool finite() const {
    return std::isfinite(a1) && std::isfinite(b1) && std::isfinite(a2) &&
           std::isfinite(b2);
  }
};

inline ModelParams operator+(const ModelParams& p, const std::array<double, 4>& s) {
  return {p.a1 + s[0], p.b1 + s[1], p.a2 + s[2], p.b2 + s[3]};
}

// One test group: device count, stress level, strictly increasing
// inspection times (tau_0 = 0 is implicit).
struct GroupDesign {
  int devices = 0;
  double stress = 0.0;
  std::vector<double> tau;

  void validate() const {
    if (devices < 1) throw std::invalid_argument("GroupDesign: devices must be >= 1");
    if (tau.empty()) throw std::invalid_argument("GroupDesign: no inspection times");
    double prev = 0.0;
    for (double t : tau) {
      if (!(t > prev) || !std::isfinite(t))
        throw std::invalid_argument("GroupDesign: inspection times must be positive and strictly increasing");
      prev = t;
    }
    if (!std::isfinite(stress))
      throw std::invalid_argument("GroupDesign: stress must be finite");
  }
  int intervals() const { return static_cast<int>(tau.size()); }
};

// Cell probabilities for one group: failure cells p(l, r) and the
// survival probability p0.  Cells partition the sample space.
struct CellProbabilities {
  double p0 = 0.0;
  std::vector<std::array<double, 2>> p;  // [interval][cause]

  int intervals() const { return static_cast<int>(p.size()); }
  int cells() const { return 2 * intervals() + 1; }

  // Flat layout used throughout: h = 2*l + r for failure cells,
  // survival last (h = 2L).
  std::vector<double> flat() const {
    std::vector<double> out;
    out.reserve(cells());
    for (const auto& row : p) {
      out.push_back(row[0]);
      out.push_back(row[1]);
    }
    out.push_back(p0);
    return out;
  }
  double sum() const {
    double s = p0;
    for (const auto& row : p) s += row[0] + row[1];
    return s;
  }
};

template <class S>
struct LinkValues {
  S alpha1, theta1, alpha2, theta2;
};

namespace detail {

template <class S>
S seed_scalar(double value, int slot) {
  if constexpr (std::is_same_v<S, double>) {
    (void)slot;
    return value;
  } else {
    return S::seed(value, slot);
  }
}

template <class S>
LinkValues<S> stress_link_t(const S& a1, const S& b1, const S& a2, const S& b2,
                            double s) {
  using nosd::exp;
  using std::exp;
  return {exp(a1 * S(s)), exp(b1 * S(s)), exp(a2 * S(s)), exp(b2 * S(s))};
}

// integral_x^inf (c0 + c1 t + c2 t^2) e^{-th t} dt multiplied by th^3
template <class S>
S poly_exp_tail(const S& x, const S& th, const S& c0, const S& c1, const S& c2) {
  using nosd::exp;
  using std::exp;
  const S tx = th * x;
  return exp(-tx) * (c0 * th * th + c1 * (tx * th + th) +
                     c2 * (tx * tx + S(2.0) * tx + S(2.0)));
}

// Cell probabilities in flat h-order for one group, generic over scalar
// type so the same closed form yields values (double) and gradients
// (Dual4).  The failure cell for cause 1 on (lo, hi] is
//   integral f_1(t) S_2(t) dt
// whose integrand is a quadratic polynomial times e^{-(th1+th2) t}.
template <class S>
std::vector<S> cell_probs_t(const LinkValues<S>& lk, const std::vector<double>& tau) {
  using nosd::exp;
  using std::exp;
  const S one(1.0);
  const S th = lk.theta1 + lk.theta2;
  const S d1 = lk.alpha1 * lk.theta1 + one;
  const S d2 = lk.alpha2 * lk.theta2 + one;
  const S inv_norm = one / (d1 * d2 * th * th * th);

  // cause 1: f1 * S2, cause 2: f2 * S1
  const S k1 = lk.theta1 * lk.theta1 * inv_norm;
  const S c0_1 = lk.alpha1 * (one + lk.alpha2 * lk.theta2);
  const S c1_1 = one + lk.alpha2 * lk.theta2 + lk.alpha1 * lk.theta2;
  const S c2_1 = lk.theta2;
  const S k2 = lk.theta2 * lk.theta2 * inv_norm;
  const S c0_2 = lk.alpha2 * (one + lk.alpha1 * lk.theta1);
  const S c1_2 = one + lk.alpha1 * lk.theta1 + lk.alpha2 * lk.theta1;
  const S c2_2 = lk.theta1;

  const int L = static_cast<int>(tau.size());
  std::vector<S> out(2 * L + 1);
  S e1_lo = poly_exp_tail(S(0.0), th, c0_1, c1_1, c2_1);
  S e2_lo = poly_exp_tail(S(0.0), th, c0_2, c1_2, c2_2);
  for (int l = 0; l < L; ++l) {
    const S e1_hi = poly_exp_tail(S(tau[l]), th, c0_1, c1_1, c2_1);
    const S e2_hi = poly_exp_tail(S(tau[l]), th, c0_2, c1_2, c2_2);
    out[2 * l] = k1 * (e1_lo - e1_hi);
    out[2 * l + 1] = k2 * (e2_lo - e2_hi);
    e1_lo = e1_hi;
    e2_lo = e2_hi;
  }
  const S tl(tau[L - 1]);
  const S s1 = (one + lk.alpha1 * lk.theta1 + lk.theta1 * tl) / d1 * exp(-lk.theta1 * tl);
  const S s2 = (one + lk.alpha2 * lk.theta2 + lk.theta2 * tl) / d2 * exp(-lk.theta2 * tl);
  out[2 * L] = s1 * s2;
  return out;
}

template <class S>
std::vector<S> cell_probs_t(const ModelParams& params, const GroupDesign& g) {
  const auto lk =
      stress_link_t(seed_scalar<S>(params.a1, 0), seed_scalar<S>(params.b1, 1),
                    seed_scalar<S>(params.a2, 2), seed_scalar<S>(params.b2, 3),
                    g.stress);
  return cell_probs_t(lk, g.tau);
}

}  // namespace detail

// alpha_r = exp(a_r s), theta_r = exp(b_r s).  Overflow of the exponential
// is rejected as a parameter-domain error rather than saturated.
inline LinkValues<double> stress_link(const ModelParams& params, double s) {
  if (!params.finite() || !std::isfinite(s))
    throw std::domain_error("stress_link: non-finite parameter or stress");
  const auto lk = detail::stress_link_t<double>(params.a1, params.b1, params.a2,
                                                params.b2, s);
  if (!std::isfinite(lk.alpha1) || !std::isfinite(lk.theta1) ||
      !std::isfinite(lk.alpha2) || !std::isfinite(lk.theta2) ||
      lk.alpha1 <= 0.0 || lk.theta1 <= 0.0 || lk.alpha2 <= 0.0 || lk.theta2 <= 0.0)
    throw std::domain_error("stress_link: exp link overflow or underflow to a non-positive value");
  return lk;
}

inline void check_lindley_domain(double alpha, double theta) {
  if (!(theta > 0.0) || !(alpha + theta > 0.0))
    throw std::domain_error("lindley: requires theta > 0 and alpha + theta > 0");
}

// Two-parameter Lindley distribution with shape alpha and scale theta.
inline double lindley_cdf(double t, double alpha, double theta) {
  check_lindley_domain(alpha, theta);
  if (t < 0.0) throw std::domain_error("lindley_cdf: t must be nonnegative");
  const double d = alpha * theta + 1.0;
  return 1.0 - (1.0 + alpha * theta + theta * t) / d * std::exp(-theta * t);
}

inline double lindley_sf(double t, double alpha, double theta) {
  check_lindley_domain(alpha, theta);
  if (t < 0.0) throw std::domain_error("lindley_sf: t must be nonnegative");
  const double d = alpha * theta + 1.0;
  return (1.0 + alpha * theta + theta * t) / d * std::exp(-theta * t);
}

inline double lindley_pdf(double t, double alpha, double theta) {
  check_lindley_domain(alpha, theta);
  if (t < 0.0) throw std::domain_error("lindley_pdf: t must be nonnegative");
  return theta * theta * (alpha + t) * std::exp(-theta * t) / (alpha * theta + 1.0);
}

// Closed-form failure/survival cell probabilities for one group.
inline CellProbabilities cell_probabilities(const ModelParams& params,
                                            const GroupDesign& g) {
  g.validate();
  const auto lk = stress_link(params, g.stress);  // validates the domain
  const auto flat = detail::cell_probs_t(lk, g.tau);
  CellProbabilities out;
  const int L = g.intervals();
  out.p.resize(L);
  for (int l = 0; l < L; ++l) out.p[l] = {flat[2 * l], flat[2 * l + 1]};
  out.p0 = flat[2 * L];
  return out;
}

// d(cell_h) / d(a1, b1, a2, b2) for every cell, columns in flat h-order.
// Columns sum to zero across cells since the cells partition unity.
inline Eigen::Matrix<double, 4, Eigen::Dynamic> cell_prob_gradient(
    const ModelParams& params, const GroupDesign& g) {
  g.validate();
  stress_link(params, g.stress);  // domain check
  const auto cells = detail::cell_probs_t<Dual4>(params, g);
  Eigen::Matrix<double, 4, Eigen::Dynamic> grad(4, cells.size());
  for (std::size_t h = 0; h < cells.size(); ++h)
    for (int j = 0; j < 4; ++j) grad(j, h) = cells[h].d[j];
  return grad;
}

}  // namespace nosd
