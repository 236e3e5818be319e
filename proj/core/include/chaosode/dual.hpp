#pragma once

/// \file dual.hpp
/// Forward-mode derivative-carrying scalar.
///
/// A `Dual<W>` carries a value and W directional derivatives. Arithmetic
/// propagates the tangents by the chain rule, so any code templated on its
/// scalar type (RK4 steps, basis evaluation, network layers) yields exact
/// derivatives of the discretized computation when fed duals.

#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>

namespace chaosode {

template <std::size_t W>
struct Dual {
  double v = 0.0;
  std::array<double, W> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit lift from real
  constexpr Dual(double value, const std::array<double, W>& tangent) : v(value), d(tangent) {}

  /// Value with a unit tangent in direction `k`.
  static Dual variable(double value, std::size_t k) {
    Dual r(value);
    r.d[k] = 1.0;
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t k = 0; k < W; ++k) d[k] += o.d[k];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t k = 0; k < W; ++k) d[k] -= o.d[k];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t k = 0; k < W; ++k) d[k] = d[k] * o.v + v * o.d[k];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    const double q = v * inv;
    for (std::size_t k = 0; k < W; ++k) d[k] = (d[k] - q * o.d[k]) * inv;
    v = q;
    return *this;
  }
  Dual& operator+=(double s) {
    v += s;
    return *this;
  }
  Dual& operator-=(double s) {
    v -= s;
    return *this;
  }
  Dual& operator*=(double s) {
    v *= s;
    for (auto& t : d) t *= s;
    return *this;
  }
  Dual& operator/=(double s) {
    v /= s;
    for (auto& t : d) t /= s;
    return *this;
  }
};

/// Tangent width used by the runtime-polymorphic RHS interface.
inline constexpr std::size_t kDualWidth = 8;
using Dual8 = Dual<kDualWidth>;

template <std::size_t W>
Dual<W> operator-(Dual<W> a) {
  a.v = -a.v;
  for (auto& t : a.d) t = -t;
  return a;
}

template <std::size_t W>
Dual<W> operator+(Dual<W> a, const Dual<W>& b) { return a += b; }
template <std::size_t W>
Dual<W> operator-(Dual<W> a, const Dual<W>& b) { return a -= b; }
template <std::size_t W>
Dual<W> operator*(Dual<W> a, const Dual<W>& b) { return a *= b; }
template <std::size_t W>
Dual<W> operator/(Dual<W> a, const Dual<W>& b) { return a /= b; }

template <std::size_t W>
Dual<W> operator+(Dual<W> a, double s) { return a += s; }
template <std::size_t W>
Dual<W> operator+(double s, Dual<W> a) { return a += s; }
template <std::size_t W>
Dual<W> operator-(Dual<W> a, double s) { return a -= s; }
template <std::size_t W>
Dual<W> operator-(double s, const Dual<W>& a) { return Dual<W>(s) - a; }
template <std::size_t W>
Dual<W> operator*(Dual<W> a, double s) { return a *= s; }
template <std::size_t W>
Dual<W> operator*(double s, Dual<W> a) { return a *= s; }
template <std::size_t W>
Dual<W> operator/(Dual<W> a, double s) { return a /= s; }
template <std::size_t W>
Dual<W> operator/(double s, const Dual<W>& a) { return Dual<W>(s) / a; }

template <std::size_t W>
bool operator<(const Dual<W>& a, const Dual<W>& b) { return a.v < b.v; }
template <std::size_t W>
bool operator>(const Dual<W>& a, const Dual<W>& b) { return a.v > b.v; }

template <std::size_t W>
Dual<W> tanh(const Dual<W>& a) {
  const double t = std::tanh(a.v);
  Dual<W> r(t);
  const double s = 1.0 - t * t;
  for (std::size_t k = 0; k < W; ++k) r.d[k] = s * a.d[k];
  return r;
}

template <std::size_t W>
Dual<W> exp(const Dual<W>& a) {
  const double e = std::exp(a.v);
  Dual<W> r(e);
  for (std::size_t k = 0; k < W; ++k) r.d[k] = e * a.d[k];
  return r;
}

template <std::size_t W>
Dual<W> sqrt(const Dual<W>& a) {
  const double s = std::sqrt(a.v);
  Dual<W> r(s);
  const double g = 0.5 / s;
  for (std::size_t k = 0; k < W; ++k) r.d[k] = g * a.d[k];
  return r;
}

template <std::size_t W>
std::ostream& operator<<(std::ostream& os, const Dual<W>& a) {
  os << a.v << "+[";
  for (std::size_t k = 0; k < W; ++k) os << (k ? "," : "") << a.d[k];
  return os << "]";
}

inline double value_of(double x) { return x; }
template <std::size_t W>
double value_of(const Dual<W>& x) { return x.v; }

inline bool is_finite(double x) { return std::isfinite(x); }
template <std::size_t W>
bool is_finite(const Dual<W>& x) {
  if (!std::isfinite(x.v)) return false;
  for (double t : x.d)
    if (!std::isfinite(t)) return false;
  return true;
}

}  // namespace chaosode
