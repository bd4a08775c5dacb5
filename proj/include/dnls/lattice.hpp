#pragma once

// Finite lattice box [-L, L] with zero exterior, complex amplitude states
// and the disorder data living on the box.

#include "dnls/coefficient.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace dnls {

struct LatticeBox {
  int half_width = 0;

  LatticeBox() = default;
  explicit LatticeBox(int L) : half_width(L) {
    if (L < 1) throw std::invalid_argument("LatticeBox: half width must be positive");
  }

  std::size_t size() const { return static_cast<std::size_t>(2 * half_width + 1); }
  bool contains(int j) const { return j >= -half_width && j <= half_width; }
  std::size_t offset(int j) const { return static_cast<std::size_t>(j + half_width); }
  int site(std::size_t offset) const { return static_cast<int>(offset) - half_width; }

  /// Smallest box hosting an experiment at (j0, N, A): L >= j0 + N + 20A + 2.
  static int required_half_width(int j0, int N, double A) {
    return j0 + N + static_cast<int>(std::ceil(20.0 * A)) + 2;
  }
};

/// Complex amplitudes q_j for j in the box; reads outside the box return 0.
class State {
 public:
  State() = default;
  explicit State(LatticeBox box) : box_(box), amp_(box.size(), Complex{}) {}
  State(LatticeBox box, std::vector<Complex> amplitudes) : box_(box), amp_(std::move(amplitudes)) {
    if (amp_.size() != box_.size()) throw std::invalid_argument("State: size does not match box");
  }

  LatticeBox const& box() const { return box_; }
  std::size_t size() const { return amp_.size(); }

  Complex operator()(int j) const { return box_.contains(j) ? amp_[box_.offset(j)] : Complex{}; }
  Complex& at(int j) {
    if (!box_.contains(j)) throw std::out_of_range("State: site outside box");
    return amp_[box_.offset(j)];
  }

  std::vector<Complex>& data() { return amp_; }
  std::vector<Complex> const& data() const { return amp_; }

  double norm_squared() const {
    double s = 0.0;
    for (auto const& z : amp_) s += std::norm(z);
    return s;
  }

  double sup_norm() const {
    double m = 0.0;
    for (auto const& z : amp_) m = std::max(m, std::abs(z));
    return m;
  }

 private:
  LatticeBox box_;
  std::vector<Complex> amp_;
};

/// Potential v_j in [0,1] and its frequency modulation w_j; the effective
/// frequencies are v_j + w_j.
struct DisorderRealization {
  LatticeBox box;
  std::vector<double> v;
  std::vector<double> w;
  std::uint64_t seed = 0;

  DisorderRealization() = default;
  explicit DisorderRealization(LatticeBox b, std::uint64_t s = 0)
      : box(b), v(b.size(), 0.0), w(b.size(), 0.0), seed(s) {}

  double potential(int j) const { return box.contains(j) ? v[box.offset(j)] : 0.0; }
  double shift(int j) const { return box.contains(j) ? w[box.offset(j)] : 0.0; }
  double modulated(int j) const { return potential(j) + shift(j); }

  void set_potential(int j, double value) { v.at(box.offset(j)) = value; }
};

}  // namespace dnls
