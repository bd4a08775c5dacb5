#pragma once

// Sparse polynomial Hamiltonians in the lattice variables (q_j, conj q_j).
//
// A Hamiltonian is stored as a real diagonal part  sum_j D_j |q_j|^2  plus a
// hash map from canonical multi-indices to coefficients.  The equation of
// motion is  i dq_j/dt = 2 dH/d(conj q_j),  so the frequency of site j is
// 2 D_j.  Poisson brackets follow
//
//   {A, B} = sum_j dA/d(conj q_j) dB/dq_j - dA/dq_j dB/d(conj q_j).

#include "dnls/coefficient.hpp"
#include "dnls/lattice.hpp"
#include "dnls/multi_index.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dnls {

class RealityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <class C>
class PolynomialHamiltonian {
 public:
  using Traits = CoefficientTraits<C>;
  using Real = typename Traits::real_type;
  using TermMap = std::unordered_map<MultiIndex, C, MultiIndexHash>;

  PolynomialHamiltonian() = default;

  // -- terms ---------------------------------------------------------------

  void add_term(MultiIndex const& n, C const& c) {
    if (Traits::is_zero(c)) return;
    auto [it, inserted] = terms_.try_emplace(n, c);
    if (!inserted) {
      it->second += c;
      if (Traits::is_zero(it->second)) terms_.erase(it);
    }
  }

  /// Adds c*M_n and conj(c)*M_conj(n); a resonant n receives 2*Re(c).
  void add_real_pair(MultiIndex const& n, C const& c) {
    add_term(n, c);
    add_term(n.conjugate(), Traits::conj(c));
  }

  void set_term(MultiIndex const& n, C const& c) {
    if (Traits::is_zero(c)) {
      terms_.erase(n);
    } else {
      terms_[n] = c;
    }
  }

  void erase_term(MultiIndex const& n) { terms_.erase(n); }

  C coefficient(MultiIndex const& n) const {
    auto it = terms_.find(n);
    return it == terms_.end() ? C{} : it->second;
  }

  TermMap const& terms() const { return terms_; }
  std::size_t term_count() const { return terms_.size(); }

  /// Terms in canonical index order; used wherever output must be reproducible.
  std::vector<std::pair<MultiIndex, C>> sorted_terms() const {
    std::vector<std::pair<MultiIndex, C>> out(terms_.begin(), terms_.end());
    std::sort(out.begin(), out.end(), [](auto const& a, auto const& b) { return a.first < b.first; });
    return out;
  }

  // -- diagonal ------------------------------------------------------------

  void add_diagonal(int j, Real const& value) {
    auto [it, inserted] = diagonal_.try_emplace(j, value);
    if (!inserted) it->second += value;
    if (it->second == Real(0)) diagonal_.erase(it);
  }

  Real diagonal(int j) const {
    auto it = diagonal_.find(j);
    return it == diagonal_.end() ? Real(0) : it->second;
  }

  std::map<int, Real> const& diagonal() const { return diagonal_; }

  /// Site frequency 2 D_j.
  Real frequency(int j) const { return Real(2) * diagonal(j); }

  // -- bookkeeping ---------------------------------------------------------

  double remainder_norm() const { return remainder_norm_; }
  void add_remainder(double mass) { remainder_norm_ += mass; }

  bool empty() const { return terms_.empty() && diagonal_.empty(); }

  /// Visits every term, the diagonal included as indices (j,1,1).
  template <class Fn>
  void for_each_term(Fn&& fn) const {
    for (auto const& [j, d] : diagonal_) fn(MultiIndex::square_modulus(j), Traits::from_real(d));
    for (auto const& [n, c] : terms_) fn(n, c);
  }

  double l1_mass() const {
    double s = 0.0;
    for_each_term([&s](MultiIndex const&, C const& c) { s += Traits::magnitude(c); });
    return s;
  }

  PolynomialHamiltonian& operator+=(PolynomialHamiltonian const& o) {
    for (auto const& [j, d] : o.diagonal_) add_diagonal(j, d);
    for (auto const& [n, c] : o.terms_) add_term(n, c);
    remainder_norm_ += o.remainder_norm_;
    return *this;
  }

  friend PolynomialHamiltonian operator+(PolynomialHamiltonian a, PolynomialHamiltonian const& b) {
    return a += b;
  }

  PolynomialHamiltonian scaled(C const& factor) const {
    PolynomialHamiltonian out;
    for_each_term([&](MultiIndex const& n, C const& c) { out.add_term(n, c * factor); });
    out.remainder_norm_ = remainder_norm_;
    return out;
  }

  PolynomialHamiltonian operator-() const { return scaled(Traits::from_int(-1)); }

  /// Every stored index n has its conjugate with coefficient sign * conj(c).
  /// sign = +1 tests reality, sign = -1 anti-reality.
  bool has_conjugate_symmetry(int sign, double tol = 0.0) const {
    for (auto const& [n, c] : terms_) {
      C expected = Traits::conj(c);
      if (sign < 0) expected = C{} - expected;
      C const diff = coefficient(n.conjugate()) - expected;
      if (Traits::magnitude(diff) > tol * std::max(1.0, Traits::magnitude(c))) return false;
    }
    return true;
  }
  bool is_real(double tol = 0.0) const { return has_conjugate_symmetry(+1, tol); }
  bool is_anti_real(double tol = 0.0) const {
    return diagonal_.empty() && has_conjugate_symmetry(-1, tol);
  }

  bool is_gauge_balanced() const {
    return std::all_of(terms_.begin(), terms_.end(),
                       [](auto const& kv) { return kv.first.is_gauge_balanced(); });
  }

  friend bool operator==(PolynomialHamiltonian const& a, PolynomialHamiltonian const& b) {
    if (a.diagonal_ != b.diagonal_ || a.terms_.size() != b.terms_.size()) return false;
    for (auto const& [n, c] : a.terms_) {
      auto it = b.terms_.find(n);
      if (it == b.terms_.end() || !(it->second == c)) return false;
    }
    return true;
  }

 private:
  std::map<int, Real> diagonal_;
  TermMap terms_;
  double remainder_norm_ = 0.0;
};

using Hamiltonian = PolynomialHamiltonian<Complex>;
using ExactHamiltonian = PolynomialHamiltonian<ExactComplex>;

namespace detail {

/// Exponents of m and n added site by site, with one q and one conj(q)
/// removed at `site`.
inline MultiIndex contract(MultiIndex const& m, MultiIndex const& n, int site) {
  auto const& a = m.entries();
  auto const& b = n.entries();
  std::vector<SiteExponent> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, k = 0;
  while (i < a.size() || k < b.size()) {
    SiteExponent e;
    if (k == b.size() || (i < a.size() && a[i].site < b[k].site)) {
      e = a[i++];
    } else if (i == a.size() || b[k].site < a[i].site) {
      e = b[k++];
    } else {
      e = {a[i].site, a[i].q + b[k].q, a[i].qbar + b[k].qbar};
      ++i;
      ++k;
    }
    if (e.site == site) {
      e.q -= 1;
      e.qbar -= 1;
      if (e.q == 0 && e.qbar == 0) continue;
    }
    out.push_back(e);
  }
  return MultiIndex::from_sorted(std::move(out));
}

inline Complex int_power(Complex z, int p) {
  Complex r{1.0, 0.0};
  while (p > 0) {
    if (p & 1) r *= z;
    z *= z;
    p >>= 1;
  }
  return r;
}

inline Complex monomial_value(MultiIndex const& n, State const& q) {
  Complex v{1.0, 0.0};
  for (auto const& e : n.entries()) {
    Complex const z = q(e.site);
    v *= int_power(z, e.q) * int_power(std::conj(z), e.qbar);
  }
  return v;
}

}  // namespace detail

/// Poisson bracket {a, b}.  For monomials m, n the contribution of a shared
/// site k is (m'_k n_k - m_k n'_k) times the monomial with exponents m + n and
/// one q_k, one conj(q_k) removed.  The result carries no diagonal part.
template <class C>
PolynomialHamiltonian<C> poisson_bracket(PolynomialHamiltonian<C> const& a,
                                         PolynomialHamiltonian<C> const& b) {
  using Traits = CoefficientTraits<C>;
  struct Entry {
    MultiIndex const* index;
    C coeff;
    int q;
    int qbar;
  };
  // Owning storage for b's diagonal indices so the site table can point at them.
  std::vector<MultiIndex> b_diag;
  b_diag.reserve(b.diagonal().size());
  for (auto const& [j, d] : b.diagonal()) b_diag.push_back(MultiIndex::square_modulus(j));

  std::unordered_map<int, std::vector<Entry>> by_site;
  {
    std::size_t i = 0;
    for (auto const& [j, d] : b.diagonal()) {
      by_site[j].push_back({&b_diag[i++], Traits::from_real(d), 1, 1});
    }
    for (auto const& [n, c] : b.terms()) {
      for (auto const& e : n.entries()) by_site[e.site].push_back({&n, c, e.q, e.qbar});
    }
  }

  PolynomialHamiltonian<C> out;
  a.for_each_term([&](MultiIndex const& m, C const& cm) {
    for (auto const& em : m.entries()) {
      auto it = by_site.find(em.site);
      if (it == by_site.end()) continue;
      for (auto const& en : it->second) {
        long long const factor =
            static_cast<long long>(em.qbar) * en.q - static_cast<long long>(em.q) * en.qbar;
        if (factor == 0) continue;
        out.add_term(detail::contract(m, *en.index, em.site),
                     Traits::from_int(factor) * cm * en.coeff);
      }
    }
  });
  return out;
}

namespace detail {

// Neumaier-compensated sum: a transformed Hamiltonian agrees with the
// original term by term away from the barrier, and plain summation in hash
// order would leave roundoff of the size of the remainder being checked.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double x) {
    double const t = sum + x;
    carry += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace detail

/// Real value of H at q.  The imaginary residue must stay below 1e-10 of
/// sum |c_n| |M_n(q)|, otherwise RealityViolation is thrown.
inline double evaluate(Hamiltonian const& H, State const& q) {
  detail::CompensatedSum re, im;
  double scale = 0.0;
  H.for_each_term([&](MultiIndex const& n, Complex const& c) {
    Complex const t = c * detail::monomial_value(n, q);
    re.add(t.real());
    im.add(t.imag());
    scale += std::abs(t);
  });
  if (std::abs(im.value()) > 1e-10 * std::max(scale, 1e-300)) {
    throw RealityViolation("evaluate: imaginary residue " + std::to_string(im.value()) + " exceeds tolerance");
  }
  return re.value();
}

/// Complex value without the reality check (generators are anti-real).
inline Complex evaluate_complex(Hamiltonian const& H, State const& q) {
  detail::CompensatedSum re, im;
  H.for_each_term([&](MultiIndex const& n, Complex const& c) {
    Complex const t = c * detail::monomial_value(n, q);
    re.add(t.real());
    im.add(t.imag());
  });
  return {re.value(), im.value()};
}

/// d H / d(conj q_j) for every site of the box.
inline State conjugate_gradient(Hamiltonian const& H, State const& q) {
  State grad(q.box());
  H.for_each_term([&](MultiIndex const& n, Complex const& c) {
    auto const& es = n.entries();
    for (std::size_t k = 0; k < es.size(); ++k) {
      if (es[k].qbar == 0 || !q.box().contains(es[k].site)) continue;
      Complex v = c * static_cast<double>(es[k].qbar);
      for (std::size_t i = 0; i < es.size(); ++i) {
        Complex const z = q(es[i].site);
        int const qbar = i == k ? es[i].qbar - 1 : es[i].qbar;
        v *= detail::int_power(z, es[i].q) * detail::int_power(std::conj(z), qbar);
      }
      grad.at(es[k].site) += v;
    }
  });
  return grad;
}

/// dq_j/dt = -2i dH/d(conj q_j).
inline State vector_field(Hamiltonian const& H, State const& q) {
  State dq = conjugate_gradient(H, q);
  for (auto& z : dq.data()) z *= Complex{0.0, -2.0};
  return dq;
}

struct NormViolation {
  MultiIndex index;
  double magnitude;
  double bound;
};

/// Terms violating |c(n)| < exp(-rho (Delta(n) + |n| - 2) log(1/eps)).
template <class C>
std::vector<NormViolation> weighted_norm_check(PolynomialHamiltonian<C> const& H, double rho, double eps) {
  std::vector<NormViolation> out;
  for (auto const& [n, c] : H.sorted_terms()) {
    double const bound = std::exp(-rho * (n.diameter() + n.degree() - 2) * std::log(1.0 / eps));
    double const mag = CoefficientTraits<C>::magnitude(c);
    if (!(mag < bound)) out.push_back({n, mag, bound});
  }
  return out;
}

/// Removes terms with |c| < coeff_floor, diameter > diameter_cap or
/// degree > degree_cap; the removed l1 mass is added to the remainder.
template <class C>
std::pair<PolynomialHamiltonian<C>, double> prune(PolynomialHamiltonian<C> H, double coeff_floor,
                                                  int diameter_cap, int degree_cap) {
  if (diameter_cap < 0 || degree_cap <= 0) throw std::invalid_argument("prune: caps must be positive");
  std::vector<MultiIndex> drop;
  double dropped = 0.0;
  for (auto const& [n, c] : H.terms()) {
    double const mag = CoefficientTraits<C>::magnitude(c);
    if (mag < coeff_floor || n.diameter() > diameter_cap || n.degree() > degree_cap) {
      drop.push_back(n);
      dropped += mag;
    }
  }
  for (auto const& n : drop) H.erase_term(n);
  H.add_remainder(dropped);
  return {std::move(H), dropped};
}

/// H = 1/2 ( sum v_j |q_j|^2 + eps1 sum (conj q_j q_{j+1} + q_j conj q_{j+1})
///           + eps2/2 sum |q_j|^4 )  on the box with zero exterior.
inline Hamiltonian build_initial_hamiltonian(DisorderRealization const& V, double eps1, double eps2,
                                             LatticeBox box) {
  if (box.half_width < 1) throw std::invalid_argument("build_initial_hamiltonian: box too small");
  if (V.box.half_width < box.half_width) {
    throw std::invalid_argument("build_initial_hamiltonian: potential does not cover the box");
  }
  Hamiltonian H;
  int const L = box.half_width;
  for (int j = -L; j <= L; ++j) {
    H.add_diagonal(j, 0.5 * V.potential(j));
    if (eps2 != 0.0) H.add_term(MultiIndex::canonicalize({{j, 2, 2}}), Complex{0.25 * eps2, 0.0});
    if (eps1 != 0.0 && j < L) {
      H.add_real_pair(MultiIndex::canonicalize({{j, 1, 0}, {j + 1, 0, 1}}), Complex{0.5 * eps1, 0.0});
    }
  }
  return H;
}

}  // namespace dnls
