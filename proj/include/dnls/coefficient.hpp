#pragma once

// Coefficient rings for polynomial Hamiltonians: complex doubles for
// production runs and exact complex rationals for identity checks.

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <complex>

namespace dnls {

using Complex = std::complex<double>;
using Rational = boost::multiprecision::cpp_rational;

struct ExactComplex {
  Rational re{0};
  Rational im{0};

  ExactComplex() = default;
  ExactComplex(Rational r, Rational i = 0) : re(std::move(r)), im(std::move(i)) {}
  ExactComplex(long long r) : re(r), im(0) {}

  ExactComplex& operator+=(ExactComplex const& o) {
    re += o.re;
    im += o.im;
    return *this;
  }
  ExactComplex& operator-=(ExactComplex const& o) {
    re -= o.re;
    im -= o.im;
    return *this;
  }
  friend ExactComplex operator+(ExactComplex a, ExactComplex const& b) { return a += b; }
  friend ExactComplex operator-(ExactComplex a, ExactComplex const& b) { return a -= b; }
  friend ExactComplex operator-(ExactComplex const& a) { return {-a.re, -a.im}; }
  friend ExactComplex operator*(ExactComplex const& a, ExactComplex const& b) {
    return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
  }
  friend bool operator==(ExactComplex const& a, ExactComplex const& b) {
    return a.re == b.re && a.im == b.im;
  }
};

template <class C>
struct CoefficientTraits;

template <>
struct CoefficientTraits<Complex> {
  using real_type = double;
  static Complex from_real(double x) { return {x, 0.0}; }
  static Complex from_int(long long k) { return {static_cast<double>(k), 0.0}; }
  static Complex conj(Complex const& c) { return std::conj(c); }
  static bool is_zero(Complex const& c) { return c == Complex{}; }
  static double magnitude(Complex const& c) { return std::abs(c); }
  static double real_part(Complex const& c) { return c.real(); }
};

template <>
struct CoefficientTraits<ExactComplex> {
  using real_type = Rational;
  static ExactComplex from_real(Rational const& x) { return {x, 0}; }
  static ExactComplex from_int(long long k) { return {Rational(k), 0}; }
  static ExactComplex conj(ExactComplex const& c) { return {c.re, -c.im}; }
  static bool is_zero(ExactComplex const& c) { return c.re == 0 && c.im == 0; }
  static double magnitude(ExactComplex const& c) {
    return std::hypot(static_cast<double>(c.re), static_cast<double>(c.im));
  }
  static Rational real_part(ExactComplex const& c) { return c.re; }
};

}  // namespace dnls
