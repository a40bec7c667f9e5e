#pragma once

// Forward-mode automatic differentiation with a fixed number of tangent
// directions. Nesting Jet<Jet<double, N>, N> yields exact second derivatives,
// which is how the transcription builds Lagrangian Hessians block by block.

#include <array>
#include <cmath>
#include <numbers>
#include <type_traits>

#include <Eigen/Core>

namespace quietpath::ad {

template <typename T, int N>
struct Jet {
  T a{};
  std::array<T, N> v{};

  constexpr Jet() = default;
  constexpr Jet(double s) : a(s) {}  // NOLINT: implicit constants are intended
  template <typename U = T>
    requires(!std::is_same_v<U, double>)
  constexpr explicit Jet(const T& s) : a(s) {}

  static constexpr Jet variable(const T& value, int index) {
    Jet j(value);
    j.v[index] = T(1.0);
    return j;
  }

  Jet& operator+=(const Jet& o) {
    a += o.a;
    for (int i = 0; i < N; ++i) v[i] += o.v[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    a -= o.a;
    for (int i = 0; i < N; ++i) v[i] -= o.v[i];
    return *this;
  }
  Jet& operator*=(const Jet& o) { return *this = *this * o; }
  Jet& operator/=(const Jet& o) { return *this = *this / o; }
};

template <typename T>
struct is_jet : std::false_type {};
template <typename T, int N>
struct is_jet<Jet<T, N>> : std::true_type {};

/// Underlying double value of a (possibly nested) jet.
inline double value_of(double x) { return x; }
template <typename T, int N>
double value_of(const Jet<T, N>& x) {
  return value_of(x.a);
}

template <typename T, int N>
Jet<T, N> operator-(const Jet<T, N>& x) {
  Jet<T, N> r;
  r.a = -x.a;
  for (int i = 0; i < N; ++i) r.v[i] = -x.v[i];
  return r;
}

template <typename T, int N>
Jet<T, N> operator+(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r = x;
  r += y;
  return r;
}
template <typename T, int N>
Jet<T, N> operator-(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r = x;
  r -= y;
  return r;
}
template <typename T, int N>
Jet<T, N> operator*(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r;
  r.a = x.a * y.a;
  for (int i = 0; i < N; ++i) r.v[i] = x.a * y.v[i] + x.v[i] * y.a;
  return r;
}
template <typename T, int N>
Jet<T, N> operator/(const Jet<T, N>& x, const Jet<T, N>& y) {
  Jet<T, N> r;
  const T inv = T(1.0) / y.a;
  r.a = x.a * inv;
  for (int i = 0; i < N; ++i) r.v[i] = (x.v[i] - r.a * y.v[i]) * inv;
  return r;
}

template <typename T, int N>
Jet<T, N> operator+(const Jet<T, N>& x, double s) {
  Jet<T, N> r = x;
  r.a += s;
  return r;
}
template <typename T, int N>
Jet<T, N> operator+(double s, const Jet<T, N>& x) {
  return x + s;
}
template <typename T, int N>
Jet<T, N> operator-(const Jet<T, N>& x, double s) {
  Jet<T, N> r = x;
  r.a -= s;
  return r;
}
template <typename T, int N>
Jet<T, N> operator-(double s, const Jet<T, N>& x) {
  Jet<T, N> r = -x;
  r.a += s;
  return r;
}
template <typename T, int N>
Jet<T, N> operator*(const Jet<T, N>& x, double s) {
  Jet<T, N> r;
  r.a = x.a * s;
  for (int i = 0; i < N; ++i) r.v[i] = x.v[i] * s;
  return r;
}
template <typename T, int N>
Jet<T, N> operator*(double s, const Jet<T, N>& x) {
  return x * s;
}
template <typename T, int N>
Jet<T, N> operator/(const Jet<T, N>& x, double s) {
  return x * (1.0 / s);
}
template <typename T, int N>
Jet<T, N> operator/(double s, const Jet<T, N>& x) {
  return Jet<T, N>(s) / x;
}

// Comparisons look at the value only; branches on them are piecewise choices.
template <typename T, int N>
bool operator<(const Jet<T, N>& x, const Jet<T, N>& y) {
  return value_of(x) < value_of(y);
}
template <typename T, int N>
bool operator>(const Jet<T, N>& x, const Jet<T, N>& y) {
  return value_of(x) > value_of(y);
}
template <typename T, int N>
bool operator<(const Jet<T, N>& x, double s) {
  return value_of(x) < s;
}
template <typename T, int N>
bool operator>(const Jet<T, N>& x, double s) {
  return value_of(x) > s;
}
template <typename T, int N>
bool operator<=(const Jet<T, N>& x, double s) {
  return value_of(x) <= s;
}
template <typename T, int N>
bool operator>=(const Jet<T, N>& x, double s) {
  return value_of(x) >= s;
}

namespace detail {
// r = f(x) given f(x.a) and f'(x.a).
template <typename T, int N>
Jet<T, N> chain(const Jet<T, N>& x, const T& fx, const T& dfx) {
  Jet<T, N> r;
  r.a = fx;
  for (int i = 0; i < N; ++i) r.v[i] = dfx * x.v[i];
  return r;
}
}  // namespace detail

template <typename T, int N>
Jet<T, N> sin(const Jet<T, N>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(sin(x.a)), T(cos(x.a)));
}
template <typename T, int N>
Jet<T, N> cos(const Jet<T, N>& x) {
  using std::cos;
  using std::sin;
  return detail::chain(x, T(cos(x.a)), T(-sin(x.a)));
}
template <typename T, int N>
Jet<T, N> sqrt(const Jet<T, N>& x) {
  using std::sqrt;
  const T s = sqrt(x.a);
  return detail::chain(x, s, T(0.5 / s));
}
template <typename T, int N>
Jet<T, N> exp(const Jet<T, N>& x) {
  using std::exp;
  const T e = exp(x.a);
  return detail::chain(x, e, e);
}
template <typename T, int N>
Jet<T, N> log(const Jet<T, N>& x) {
  using std::log;
  return detail::chain(x, T(log(x.a)), T(1.0 / x.a));
}
template <typename T, int N>
Jet<T, N> log10(const Jet<T, N>& x) {
  using std::log10;
  return detail::chain(x, T(log10(x.a)), T(1.0 / (x.a * std::numbers::ln10)));
}
template <typename T, int N>
Jet<T, N> pow(const Jet<T, N>& x, double p) {
  using std::pow;
  return detail::chain(x, T(pow(x.a, p)), T(p * pow(x.a, p - 1.0)));
}
template <typename T, int N>
Jet<T, N> acos(const Jet<T, N>& x) {
  using std::acos;
  using std::sqrt;
  return detail::chain(x, T(acos(x.a)), T(-1.0 / sqrt(1.0 - x.a * x.a)));
}

/// Value and gradient of a scalar function of N variables.
template <int N, typename F>
std::pair<double, Eigen::Matrix<double, N, 1>> gradient(
    F&& f, const Eigen::Matrix<double, N, 1>& x) {
  using J = Jet<double, N>;
  std::array<J, N> in;
  for (int i = 0; i < N; ++i) in[i] = J::variable(x[i], i);
  const J out = f(in);
  Eigen::Matrix<double, N, 1> g;
  for (int i = 0; i < N; ++i) g[i] = out.v[i];
  return {out.a, g};
}

template <int N>
struct SecondOrder {
  double value = 0.0;
  Eigen::Matrix<double, N, 1> gradient;
  Eigen::Matrix<double, N, N> hessian;
};

/// Value, gradient and Hessian of a scalar function of N variables.
template <int N, typename F>
SecondOrder<N> hessian(F&& f, const Eigen::Matrix<double, N, 1>& x) {
  using Inner = Jet<double, N>;
  using Outer = Jet<Inner, N>;
  std::array<Outer, N> in;
  for (int i = 0; i < N; ++i) {
    in[i] = Outer(Inner::variable(x[i], i));
    in[i].v[i] = Inner(1.0);
  }
  const Outer out = f(in);
  SecondOrder<N> r;
  r.value = out.a.a;
  for (int i = 0; i < N; ++i) {
    r.gradient[i] = out.a.v[i];
    for (int j = 0; j < N; ++j) r.hessian(i, j) = out.v[i].v[j];
  }
  return r;
}

/// Value and Jacobian of a vector function R^N -> R^M.
template <int M, int N, typename F>
std::pair<Eigen::Matrix<double, M, 1>, Eigen::Matrix<double, M, N>> jacobian(
    F&& f, const Eigen::Matrix<double, N, 1>& x) {
  using J = Jet<double, N>;
  std::array<J, N> in;
  for (int i = 0; i < N; ++i) in[i] = J::variable(x[i], i);
  const std::array<J, M> out = f(in);
  Eigen::Matrix<double, M, 1> value;
  Eigen::Matrix<double, M, N> jac;
  for (int r = 0; r < M; ++r) {
    value[r] = out[r].a;
    for (int c = 0; c < N; ++c) jac(r, c) = out[r].v[c];
  }
  return {value, jac};
}

}  // namespace quietpath::ad
