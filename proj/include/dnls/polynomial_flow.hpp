#pragma once

// Time integration of the flow of an arbitrary polynomial Hamiltonian with
// the two-stage Gauss-Legendre collocation method.  The scheme is symplectic
// and conserves every quadratic first integral, so the l2 norm and, for
// Hamiltonians built from resonant monomials, every |q_j|^2 are preserved
// up to the fixed-point tolerance.

#include "dnls/polynomial.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

namespace dnls {

class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using VectorField = std::function<State(State const&)>;

namespace detail {

inline void axpy(std::vector<Complex>& y, Complex a, std::vector<Complex> const& x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

inline double max_abs_diff(std::vector<Complex> const& a, std::vector<Complex> const& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace detail

/// One Gauss-Legendre (order 4) step of size h.
inline State gauss_legendre_step(VectorField const& f, State const& q, double h) {
  double const r = std::sqrt(3.0) / 6.0;
  double const a11 = 0.25, a12 = 0.25 - r, a21 = 0.25 + r, a22 = 0.25;

  State k1 = f(q);
  State k2 = k1;
  for (int iter = 0; iter < 100; ++iter) {
    State y1 = q, y2 = q;
    detail::axpy(y1.data(), h * a11, k1.data());
    detail::axpy(y1.data(), h * a12, k2.data());
    detail::axpy(y2.data(), h * a21, k1.data());
    detail::axpy(y2.data(), h * a22, k2.data());
    State n1 = f(y1);
    State n2 = f(y2);
    double const change =
        std::max(detail::max_abs_diff(n1.data(), k1.data()), detail::max_abs_diff(n2.data(), k2.data()));
    double scale = 0.0;
    for (auto const& z : n1.data()) scale = std::max(scale, std::abs(z));
    k1 = std::move(n1);
    k2 = std::move(n2);
    if (change <= 1e-16 * std::max(scale, 1e-300) || change == 0.0) break;
    if (!std::isfinite(change)) throw NumericalAbort("gauss_legendre_step: non-finite stage");
  }
  State out = q;
  detail::axpy(out.data(), 0.5 * h, k1.data());
  detail::axpy(out.data(), 0.5 * h, k2.data());
  return out;
}

inline State integrate_field(VectorField const& f, State q, double t, int steps) {
  if (steps <= 0) throw std::invalid_argument("integrate_field: steps must be positive");
  double const h = t / steps;
  for (int i = 0; i < steps; ++i) q = gauss_legendre_step(f, q, h);
  return q;
}

/// Flow of  i dq/dt = 2 dH/d(conj q)  over time t.
inline State hamiltonian_flow(Hamiltonian const& H, State q, double t, int steps) {
  return integrate_field([&H](State const& x) { return vector_field(H, x); }, std::move(q), t, steps);
}

/// Flow generated by an anti-real F in the Lie-series convention:
/// dq_j/dtau = -dF/d(conj q_j), so that  G(flow_tau(q)) = exp(tau ad_F) G (q)
/// with ad_F G = {G, F}.
inline State generator_flow(Hamiltonian const& F, State q, double tau, int steps) {
  return integrate_field(
      [&F](State const& x) {
        State g = conjugate_gradient(F, x);
        for (auto& z : g.data()) z = -z;
        return g;
      },
      std::move(q), tau, steps);
}

}  // namespace dnls
