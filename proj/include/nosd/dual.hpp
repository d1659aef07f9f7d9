#pragma once

#include <array>
#include <cmath>

namespace nosd {

// Forward-mode dual number: a value plus an N-component gradient.
// Arithmetic propagates exact partial derivatives through the model's
// closed forms, so every "analytic gradient" in this library is the
// chain rule applied mechanically rather than a hand-derived formula.
template <int N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}

  static Dual seed(double value, int slot) {
    Dual x(value);
    x.d[slot] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (int i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (int i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (int i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (int i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
};

template <int N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <int N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <int N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <int N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <int N> Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r;
  r.v = -a.v;
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <int N> Dual<N> exp(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::exp(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

template <int N> Dual<N> log(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::log(a.v);
  const double inv = 1.0 / a.v;
  for (int i = 0; i < N; ++i) r.d[i] = inv * a.d[i];
  return r;
}

// x^c for constant exponent c
template <int N> Dual<N> pow(const Dual<N>& a, double c) {
  Dual<N> r;
  r.v = std::pow(a.v, c);
  const double f = c * std::pow(a.v, c - 1.0);
  for (int i = 0; i < N; ++i) r.d[i] = f * a.d[i];
  return r;
}

template <int N> Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r;
  r.v = std::sqrt(a.v);
  const double f = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = f * a.d[i];
  return r;
}

using Dual4 = Dual<4>;

// Uniform access to the plain value of a scalar (double or Dual).
inline double scalar_value(double x) { return x; }
template <int N> double scalar_value(const Dual<N>& x) { return x.v; }

}  // namespace nosd
