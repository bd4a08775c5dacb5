#pragma once

// Finite-difference derivatives of the normal form with respect to the
// potential: gradients of the final coefficients and the matrix dW/dV on the
// barrier window, with the determinant of V -> V + W.

#include "dnls/normal_form.hpp"
#include "dnls/parallel.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

namespace dnls {

struct SensitivityReport {
  std::vector<int> window;           // probed sites, ||j| - j0| <= N + 1
  Eigen::MatrixXd dW_dV;             // rows: w_i, cols: v_j, both over `window`
  double dW_norm = 0.0;              // spectral norm of dW_dV
  double max_resonant_gradient = 0.0;     // max_n |grad_V d(n)|
  double max_nonresonant_gradient = 0.0;  // max_n |grad_V c(n)|
  double jacobian_det = 1.0;         // det(I + dW/dV)
  double threshold = 0.0;            // eps^(1/40)
  double det_lower = 0.0;            // exp(-2 N eps^(1/40))
  double det_upper = 0.0;
  std::vector<int> failed_probes;    // sites whose +-h run threw
  std::vector<std::string> failure_messages;

  double coefficient_gradient() const { return max_resonant_gradient + max_nonresonant_gradient; }
  bool complete() const { return failed_probes.empty(); }
  bool norm_ok() const { return complete() && (dW_norm < threshold || dW_norm == 0.0); }
  bool det_ok() const { return complete() && jacobian_det > det_lower && jacobian_det < det_upper; }
  bool gradient_ok() const { return complete() && coefficient_gradient() < 1.0; }
};

struct SensitivityParameters {
  double eps1 = 0.0;
  double eps2 = 0.0;
  double A = 2.0;
  int j0 = 0;
  int N = 0;
  double h = 1e-5;
  ScheduleConstants constants = ScheduleConstants::desk();
  NormalFormOptions options;
  unsigned threads = 1;
};

inline std::vector<int> sensitivity_window(int j0, int N, LatticeBox const& box) {
  std::vector<int> out;
  for (int j = -(j0 + N + 1); j <= j0 + N + 1; ++j) {
    if (std::abs(std::abs(j) - j0) <= N + 1 && box.contains(j)) out.push_back(j);
  }
  return out;
}

/// Central differences of W and of every final coefficient in v_j, j in the
/// window.  A probe whose normal form throws is listed, not fatal.
inline SensitivityReport sensitivity_check(DisorderRealization const& V, SensitivityParameters const& p) {
  double const eps = p.eps1 + p.eps2;
  SensitivityReport rep;
  rep.window = sensitivity_window(p.j0, p.N, V.box);
  std::size_t const m = rep.window.size();
  rep.threshold = std::pow(eps, 1.0 / 40.0);
  rep.det_lower = std::exp(-2.0 * p.N * rep.threshold);
  rep.det_upper = std::exp(2.0 * p.N * rep.threshold);
  rep.dW_dV = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));

  if (eps == 0.0) return rep;  // nothing is transformed: W = 0, det = 1

  auto run_at = [&](DisorderRealization const& U) {
    DisorderRealization bare = U;
    std::fill(bare.w.begin(), bare.w.end(), 0.0);
    return run_normal_form(build_initial_hamiltonian(bare, p.eps1, p.eps2, bare.box), bare, eps, p.A, p.j0, p.N,
                           p.constants, p.options);
  };

  run_at(V);  // the unperturbed run must succeed; its exception propagates

  // per probe: column of dW/dV and the coefficient differences
  struct Probe {
    bool ok = false;
    std::string error;
    std::vector<double> dw;
    std::unordered_map<MultiIndex, Complex, MultiIndexHash> dc;
  };
  std::vector<Probe> probes(m);

  parallel_for(m, p.threads, [&](std::size_t k) {
    int const j = rep.window[k];
    Probe& pr = probes[k];
    try {
      DisorderRealization up = V, dn = V;
      up.set_potential(j, V.potential(j) + p.h);
      dn.set_potential(j, V.potential(j) - p.h);
      NormalFormResult const ru = run_at(up);
      NormalFormResult const rd = run_at(dn);
      pr.dw.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        pr.dw[i] = (ru.shift(rep.window[i]) - rd.shift(rep.window[i])) / (2.0 * p.h);
      }
      for (auto const& [n, c] : ru.H.terms()) pr.dc[n] += c;
      for (auto const& [n, c] : rd.H.terms()) pr.dc[n] -= c;
      for (auto& [n, c] : pr.dc) c /= 2.0 * p.h;
      pr.ok = true;
    } catch (std::exception const& e) {
      pr.error = e.what();
    }
  });

  std::unordered_map<MultiIndex, double, MultiIndexHash> grad2;
  for (std::size_t k = 0; k < m; ++k) {
    if (!probes[k].ok) {
      rep.failed_probes.push_back(rep.window[k]);
      rep.failure_messages.push_back(probes[k].error);
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) {
      rep.dW_dV(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = probes[k].dw[i];
    }
    for (auto const& [n, g] : probes[k].dc) grad2[n] += std::norm(g);
  }
  for (auto const& [n, g2] : grad2) {
    double const g = std::sqrt(g2);
    if (n.is_resonant()) {
      rep.max_resonant_gradient = std::max(rep.max_resonant_gradient, g);
    } else {
      rep.max_nonresonant_gradient = std::max(rep.max_nonresonant_gradient, g);
    }
  }

  if (m > 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rep.dW_dV);
    rep.dW_norm = svd.singularValues()(0);
    Eigen::MatrixXd const J = Eigen::MatrixXd::Identity(rep.dW_dV.rows(), rep.dW_dV.cols()) + rep.dW_dV;
    rep.jacobian_det = J.fullPivLu().determinant();
  }
  return rep;
}

}  // namespace dnls
