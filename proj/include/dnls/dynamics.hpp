#pragma once

// Split-step integration of
//   i dq_j/dt = v_j q_j + eps1 (q_{j-1} + q_{j+1}) + eps2 |q_j|^2 q_j
// on a box with zero exterior.  The diagonal part is an exact phase
// rotation; the hopping part uses the eigenbasis of the tridiagonal
// adjacency matrix, so every substep is unitary up to roundoff.

#include "dnls/lattice.hpp"
#include "dnls/polynomial.hpp"
#include "dnls/polynomial_flow.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnls {

/// Unitary exp(-i eps1 Delta dt) for the nearest-neighbour adjacency Delta
/// on the box.  Delta = U diag(lambda) U^T is factored once; propagators for
/// a given dt are dense complex matrices.
class HoppingPropagator {
 public:
  HoppingPropagator() = default;
  explicit HoppingPropagator(LatticeBox box) : box_(box) {
    Eigen::Index const n = static_cast<Eigen::Index>(box.size());
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd off = Eigen::VectorXd::Ones(std::max<Eigen::Index>(n - 1, 0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalAbort("HoppingPropagator: eigensolver failed");
    lambda_ = es.eigenvalues();
    U_ = es.eigenvectors();
  }

  LatticeBox const& box() const { return box_; }
  Eigen::VectorXd const& eigenvalues() const { return lambda_; }
  Eigen::MatrixXd const& eigenvectors() const { return U_; }

  /// Dense exp(-i eps1 Delta dt).
  Eigen::MatrixXcd matrix(double eps1, double dt) const {
    Eigen::VectorXcd phase(lambda_.size());
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) phase[k] = std::polar(1.0, -eps1 * lambda_[k] * dt);
    Eigen::MatrixXcd Uc = U_.cast<Complex>();
    Eigen::MatrixXcd P = Uc * phase.asDiagonal() * Uc.transpose();
    // The same P is applied millions of times, so its O(n u) defect from
    // unitarity would accumulate linearly.  Newton-Schulz polar steps push
    // it down to rounding of the final product.
    Eigen::MatrixXcd const I = Eigen::MatrixXcd::Identity(P.rows(), P.cols());
    for (int it = 0; it < 2; ++it) P = P * (1.5 * I - 0.5 * P.adjoint() * P);
    return P;
  }

 private:
  LatticeBox box_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd U_;
};

inline void diagonal_flow(State& q, double dt, DisorderRealization const& V, double eps2) {
  auto& a = q.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    double const freq = V.v[i] + eps2 * std::norm(a[i]);
    a[i] *= std::polar(1.0, -freq * dt);
  }
}

inline void apply_matrix(Eigen::MatrixXcd const& P, State& q) {
  Eigen::Map<Eigen::VectorXcd> x(q.data().data(), static_cast<Eigen::Index>(q.size()));
  Eigen::VectorXcd const y = P * x;
  x = y;
}

inline void hopping_flow(State& q, double dt, double eps1, HoppingPropagator const& prop) {
  if (eps1 == 0.0) return;
  apply_matrix(prop.matrix(eps1, dt), q);
}

/// Fixed-dt Strang stepper: half diagonal, full hopping, half diagonal.
class StrangStepper {
 public:
  StrangStepper(DisorderRealization V, double eps1, double eps2, double dt, HoppingPropagator const& prop)
      : V_(std::move(V)), eps1_(eps1), eps2_(eps2), dt_(dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("StrangStepper: dt must be positive");
    if (prop.box().half_width != V_.box.half_width) throw std::invalid_argument("StrangStepper: box mismatch");
    if (eps1_ != 0.0) P_ = prop.matrix(eps1_, dt_);
  }

  double dt() const { return dt_; }

  void step(State& q) const {
    diagonal_flow(q, 0.5 * dt_, V_, eps2_);
    if (eps1_ != 0.0) apply_matrix(P_, q);
    diagonal_flow(q, 0.5 * dt_, V_, eps2_);
  }

 private:
  DisorderRealization V_;
  double eps1_, eps2_, dt_;
  Eigen::MatrixXcd P_;
};

inline State strang_step(State q, double dt, DisorderRealization const& V, double eps1, double eps2,
                         HoppingPropagator const& prop) {
  diagonal_flow(q, 0.5 * dt, V, eps2);
  hopping_flow(q, dt, eps1, prop);
  diagonal_flow(q, 0.5 * dt, V, eps2);
  return q;
}

inline constexpr std::size_t kDenseSiteBudget = 4096;

/// exp(-i (diag V + eps1 Delta) t) q0 by dense diagonalisation.
inline State reference_linear_evolution(State const& q0, double t, DisorderRealization const& V, double eps1) {
  if (q0.size() > kDenseSiteBudget) throw std::invalid_argument("reference_linear_evolution: box exceeds dense budget");
  if (V.box.half_width != q0.box().half_width) throw std::invalid_argument("reference_linear_evolution: box mismatch");
  Eigen::Index const n = static_cast<Eigen::Index>(q0.size());
  Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd const>(V.v.data(), n);
  Eigen::VectorXd off = Eigen::VectorXd::Constant(std::max<Eigen::Index>(n - 1, 0), eps1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw NumericalAbort("reference_linear_evolution: eigensolver failed");
  Eigen::MatrixXcd const U = es.eigenvectors().cast<Complex>();
  Eigen::Map<Eigen::VectorXcd const> x(q0.data().data(), n);
  Eigen::VectorXcd c = U.transpose() * x;
  for (Eigen::Index k = 0; k < n; ++k) c[k] *= std::polar(1.0, -es.eigenvalues()[k] * t);
  Eigen::VectorXcd const y = U * c;
  State out(q0.box());
  for (Eigen::Index k = 0; k < n; ++k) out.data()[static_cast<std::size_t>(k)] = y[k];
  return out;
}

// ---- observers -----------------------------------------------------------

/// sum_{|j| > j0} |q_j|^2
inline double truncated_mass(State const& q, int j0) {
  double s = 0.0;
  int const L = q.box().half_width;
  for (int j = -L; j <= L; ++j) {
    if (std::abs(j) > j0) s += std::norm(q(j));
  }
  return s;
}

/// Mass on the `width` outermost sites at each end of the box.
inline double edge_mass(State const& q, int width = 4) {
  int const L = q.box().half_width;
  double s = 0.0;
  for (int j = -L; j <= L; ++j) {
    if (std::abs(j) > L - width) s += std::norm(q(j));
  }
  return s;
}

/// d/dt sum_{|j|>j0} |q_j|^2 = 4 Im sum_{|j|>j0} conj(q_j) dH/d(conj q_j).
inline double mass_flux(Hamiltonian const& H, State const& q, int j0) {
  State const g = conjugate_gradient(H, q);
  double s = 0.0;
  int const L = q.box().half_width;
  for (int j = -L; j <= L; ++j) {
    if (std::abs(j) > j0) s += (std::conj(q(j)) * g(j)).imag();
  }
  return 4.0 * s;
}

/// The same flux for the lattice equation: only the two hopping links
/// crossing |j| = j0 contribute.
inline double lattice_flux(State const& q, int j0, double eps1) {
  return 2.0 * eps1 *
         ((std::conj(q(j0 + 1)) * q(j0)).imag() + (std::conj(q(-j0 - 1)) * q(-j0)).imag());
}

/// H = 1/2 (sum v|q|^2 + eps1 sum (conj q_j q_{j+1} + c.c.) + eps2/2 sum |q|^4)
inline double lattice_energy(State const& q, DisorderRealization const& V, double eps1, double eps2) {
  auto const& a = q.data();
  double e = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double const m = std::norm(a[i]);
    e += V.v[i] * m + 0.5 * eps2 * m * m;
    if (i + 1 < a.size()) e += 2.0 * eps1 * (std::conj(a[i]) * a[i + 1]).real();
  }
  return 0.5 * e;
}

inline double default_time_step(DisorderRealization const& V, double eps1, double eps2, State const& q0) {
  double vmax = 0.0;
  for (double v : V.v) vmax = std::max(vmax, std::abs(v));
  double const s = q0.sup_norm();
  return 0.05 / std::max(1.0, vmax + 2.0 * eps1 + eps2 * s * s);
}

struct IntegratorConfig {
  double dt = 0.0;  // <= 0: default_time_step
  double T = 0.0;
  int samples = 512;
  bool log_grid = true;
  int j0 = 0;
  int N = 0;
  int edge_width = 4;
  std::optional<double> edge_abort = 1e-8;
};

struct ObserverSample {
  double t = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  double mass_j0 = 0.0;
  double mass_outer = 0.0;  // M_{j0+N}
  double edge = 0.0;
  double flux = 0.0;        // d/dt M_{j0+N}
};

struct ObserverSeries {
  std::vector<ObserverSample> samples;
  double dt = 0.0;
  long long steps = 0;
  // extrema over every step, not only the sampled ones
  double max_mass_outer = 0.0;
  double max_abs_flux = 0.0;
  double max_edge = 0.0;
};

class IntegrationAborted : public NumericalAbort {
 public:
  IntegrationAborted(std::string const& what, State last_good, ObserverSeries partial)
      : NumericalAbort(what), last_good_state(std::move(last_good)), series(std::move(partial)) {}
  State last_good_state;
  ObserverSeries series;
  double t = 0.0;
};

/// Step indices at which to sample: 0, then `samples` points on a log (or
/// uniform) grid up to `steps`, duplicates removed.
inline std::vector<long long> sample_steps(long long steps, int samples, bool log_grid) {
  std::vector<long long> out{0};
  if (steps <= 0 || samples <= 0) return out;
  for (int k = 1; k <= samples; ++k) {
    double const f = static_cast<double>(k) / samples;
    long long s = log_grid ? static_cast<long long>(std::llround(std::pow(static_cast<double>(steps), f)))
                           : static_cast<long long>(std::llround(f * static_cast<double>(steps)));
    s = std::clamp<long long>(s, 1, steps);
    if (s > out.back()) out.push_back(s);
  }
  if (out.back() != steps) out.push_back(steps);
  return out;
}

/// Runs Strang steps to time T (dt rounded down so that T is hit exactly).
inline ObserverSeries integrate(State q, DisorderRealization const& V, double eps1, double eps2,
                                IntegratorConfig const& cfg, HoppingPropagator const& prop,
                                State* final_state = nullptr) {
  if (cfg.T < 0.0) throw std::invalid_argument("integrate: T must be non-negative");
  double dt = cfg.dt > 0.0 ? cfg.dt : default_time_step(V, eps1, eps2, q);
  long long const steps = cfg.T > 0.0 ? static_cast<long long>(std::ceil(cfg.T / dt - 1e-9)) : 0;
  if (steps > 0) dt = cfg.T / static_cast<double>(steps);

  ObserverSeries out;
  out.dt = dt;
  out.steps = steps;
  int const outer = cfg.j0 + cfg.N;
  auto observe = [&](double t) {
    ObserverSample s;
    s.t = t;
    s.norm = std::sqrt(q.norm_squared());
    s.energy = lattice_energy(q, V, eps1, eps2);
    s.mass_j0 = truncated_mass(q, cfg.j0);
    s.mass_outer = truncated_mass(q, outer);
    s.edge = edge_mass(q, cfg.edge_width);
    s.flux = lattice_flux(q, outer, eps1);
    return s;
  };
  auto track = [&](ObserverSample const& s) {
    out.max_mass_outer = std::max(out.max_mass_outer, s.mass_outer);
    out.max_abs_flux = std::max(out.max_abs_flux, std::abs(s.flux));
    out.max_edge = std::max(out.max_edge, s.edge);
  };

  out.samples.push_back(observe(0.0));
  track(out.samples.back());
  if (steps == 0) {
    if (final_state) *final_state = q;
    return out;
  }

  StrangStepper const stepper(V, eps1, eps2, dt, prop);
  std::vector<long long> const grid = sample_steps(steps, cfg.samples, cfg.log_grid);
  std::size_t next = 1;
  State last_good = q;
  for (long long k = 1; k <= steps; ++k) {
    stepper.step(q);
    // cheap per-step extrema; the full observer set is sampled on the grid
    double const m = truncated_mass(q, outer);
    double const e = edge_mass(q, cfg.edge_width);
    double const f = lattice_flux(q, outer, eps1);
    if (!std::isfinite(m) || !std::isfinite(e) || !std::isfinite(f)) {
      IntegrationAborted err("integrate: non-finite amplitude at step " + std::to_string(k), last_good, out);
      err.t = static_cast<double>(k - 1) * dt;
      throw err;
    }
    out.max_mass_outer = std::max(out.max_mass_outer, m);
    out.max_abs_flux = std::max(out.max_abs_flux, std::abs(f));
    out.max_edge = std::max(out.max_edge, e);
    if (cfg.edge_abort && e > *cfg.edge_abort) {
      IntegrationAborted err("integrate: edge mass " + std::to_string(e) + " exceeds limit at step " +
                                 std::to_string(k),
                             q, out);
      err.t = static_cast<double>(k) * dt;
      throw err;
    }
    if (next < grid.size() && grid[next] == k) {
      out.samples.push_back(observe(static_cast<double>(k) * dt));
      ++next;
    }
    last_good = q;
  }
  if (final_state) *final_state = q;
  return out;
}

// ---- output --------------------------------------------------------------

inline void write_series_csv(std::ostream& os, ObserverSeries const& series) {
  os << "t,norm,energy,M_j0,M_j0_plus_N,edge_mass\n";
  char buf[256];
  for (auto const& s : series.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.norm, s.energy, s.mass_j0,
                  s.mass_outer, s.edge);
    os << buf;
  }
}

namespace detail {

inline void put_le64(std::ostream& os, std::uint64_t x) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((x >> (8 * i)) & 0xffu);
  os.write(b, 8);
}

inline std::uint64_t get_le64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("snapshot: truncated file");
  std::uint64_t x = 0;
  for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
  return x;
}

}  // namespace detail

/// Header: int64 half width L, double t; then 2L+1 complex doubles (re, im)
/// for j = -L..L.  Everything little-endian.
inline void write_snapshot(std::ostream& os, State const& q, double t) {
  detail::put_le64(os, static_cast<std::uint64_t>(static_cast<std::int64_t>(q.box().half_width)));
  detail::put_le64(os, std::bit_cast<std::uint64_t>(t));
  for (auto const& z : q.data()) {
    detail::put_le64(os, std::bit_cast<std::uint64_t>(z.real()));
    detail::put_le64(os, std::bit_cast<std::uint64_t>(z.imag()));
  }
}

inline std::pair<State, double> read_snapshot(std::istream& is) {
  auto const L = static_cast<std::int64_t>(detail::get_le64(is));
  if (L < 1 || L > (1 << 28)) throw std::runtime_error("snapshot: bad box size");
  double const t = std::bit_cast<double>(detail::get_le64(is));
  State q{LatticeBox(static_cast<int>(L))};
  for (auto& z : q.data()) {
    double const re = std::bit_cast<double>(detail::get_le64(is));
    double const im = std::bit_cast<double>(detail::get_le64(is));
    z = {re, im};
  }
  return {std::move(q), t};
}

inline void write_snapshot_file(std::string const& path, State const& q, double t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snapshot: cannot open " + path);
  write_snapshot(os, q, t);
}

inline std::pair<State, double> read_snapshot_file(std::string const& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snapshot: cannot open " + path);
  return read_snapshot(is);
}

}  // namespace dnls
