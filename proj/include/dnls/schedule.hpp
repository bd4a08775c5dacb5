#pragma once

// Step schedule of the finite normal-form iteration: coefficient thresholds
// delta_s, decay rates rho_s, barrier bands [a_s, b_s] (mirrored to
// [-b_s, -a_s]) and the small-divisor thresholds.

#include "dnls/multi_index.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnls {

class ScheduleInfeasible : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical constants of the iteration.  `asymptotic()` holds the values of
/// the small-epsilon construction, which cannot close on any band narrower
/// than a few hundred sites; `desk()` keeps the functional forms with
/// constants for which the iteration closes at epsilon <~ 1e-3 with N = 32.
struct ScheduleConstants {
  // delta_s = delta_{s-1}^power + eps^eps_exponent * delta_{s-1},  delta_1 = eps/2
  double delta_power = 1.9;
  double delta_eps_exponent = 1.0 / 20.0;
  // a_{s+1} = a_s + ceil(erosion * log(1/delta_{s+1}) / log(1/eps))
  double erosion = 20.0;
  // constraint diameter cap  diameter_factor * log(1/delta_{s+1}) / log(1/eps)
  double diameter_factor = 10.0;
  // small-divisor threshold  delta_s^(1 / (divisor_scale * s^divisor_step_power))
  double divisor_scale = 100.0;
  double divisor_step_power = 2.0;
  double rho_1 = 0.5;
  int max_steps = 200;

  static ScheduleConstants asymptotic() { return {}; }

  static ScheduleConstants desk() {
    ScheduleConstants c;
    c.delta_eps_exponent = 0.25;
    c.erosion = 1.0;
    c.diameter_factor = 2.0;
    c.divisor_scale = 2.0;
    c.divisor_step_power = 0.0;
    return c;
  }
};

struct ScheduleStep {
  int s = 0;
  double delta = 0.0;
  double rho = 0.0;
  int a = 0;
  int b = 0;
  double divisor_threshold = 0.0;
};

/// The mirrored band  [-b, -a] u [a, b].
struct Bands {
  int a = 0;
  int b = -1;

  bool contains_site(int j) const {
    int const m = j < 0 ? -j : j;
    return m >= a && m <= b;
  }
  /// supp n meets the bands.
  bool touches(MultiIndex const& n) const { return n.touches(a, b) || n.touches(-b, -a); }
  /// supp n lies inside the bands.
  bool contains(MultiIndex const& n) const {
    if (n.empty()) return false;
    for (auto const& e : n.entries()) {
      if (!contains_site(e.site)) return false;
    }
    return true;
  }
  int width() const { return b - a + 1; }
};

struct NormalFormSchedule {
  double eps = 0.0;
  double A = 0.0;
  int j0 = 0;
  int N = 0;
  ScheduleConstants constants;
  std::vector<ScheduleStep> steps;  // steps[s-1] for s = 1..s_star
  int s_star = 1;

  ScheduleStep const& step(int s) const { return steps.at(static_cast<std::size_t>(s - 1)); }
  double delta(int s) const { return step(s).delta; }
  Bands bands(int s) const { return {step(s).a, step(s).b}; }
  double target_accuracy() const { return std::pow(eps, A); }

  /// Constraint diameter cap  diameter_factor * log(1/delta_{s+1}) / log(1/eps)
  /// (strict upper bound on Delta(n)).
  double diameter_cap(int s) const {
    double const next = s < s_star ? delta(s + 1) : delta(s);
    return constants.diameter_factor * std::log(1.0 / next) / std::log(1.0 / eps);
  }
};

inline int minimum_barrier_width(double A) {
  return std::max(static_cast<int>(std::ceil(8.0 * A * A)), 8);
}

inline double next_delta(double delta, double eps, ScheduleConstants const& c) {
  return std::pow(delta, c.delta_power) + std::pow(eps, c.delta_eps_exponent) * delta;
}

inline double divisor_threshold(double delta, int s, ScheduleConstants const& c) {
  return std::pow(delta, 1.0 / (c.divisor_scale * std::pow(static_cast<double>(s), c.divisor_step_power)));
}

/// Builds delta_s, rho_s, a_s, b_s for s = 1..s* where s* is the first step
/// with delta_s < eps^A.  Throws ScheduleInfeasible when the bands erode past
/// [j0 - N/2, j0 + N/2] or rho drops to 1/10.
inline NormalFormSchedule build_schedule(double eps, double A, int j0, int N,
                                         ScheduleConstants const& constants = ScheduleConstants::asymptotic()) {
  if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("build_schedule: eps must lie in (0,1)");
  if (!(A > 1.0)) throw std::invalid_argument("build_schedule: A must exceed 1");
  if (N < minimum_barrier_width(A)) {
    throw std::invalid_argument("build_schedule: N below minimum " + std::to_string(minimum_barrier_width(A)));
  }
  if (j0 - N < 1) throw std::invalid_argument("build_schedule: bands must not reach the origin");

  NormalFormSchedule sched;
  sched.eps = eps;
  sched.A = A;
  sched.j0 = j0;
  sched.N = N;
  sched.constants = constants;

  double const target = std::pow(eps, A);
  double const log_inv_eps = std::log(1.0 / eps);
  ScheduleStep cur{1, eps / 2.0, constants.rho_1, j0 - N, j0 + N, 0.0};
  cur.divisor_threshold = divisor_threshold(cur.delta, 1, constants);
  sched.steps.push_back(cur);

  while (!(cur.delta < target)) {
    if (cur.s >= constants.max_steps) throw ScheduleInfeasible("build_schedule: step limit reached");
    ScheduleStep next;
    next.s = cur.s + 1;
    next.delta = next_delta(cur.delta, eps, constants);
    if (!(next.delta < cur.delta)) throw ScheduleInfeasible("build_schedule: delta_s does not decrease");
    next.rho = cur.rho * (1.0 - 1.0 / (10.0 * cur.s * cur.s));
    int const erosion = static_cast<int>(std::ceil(constants.erosion * std::log(1.0 / next.delta) / log_inv_eps));
    next.a = cur.a + erosion;
    next.b = cur.b - erosion;
    next.divisor_threshold = divisor_threshold(next.delta, next.s, constants);
    if (!(next.rho > 0.1)) throw ScheduleInfeasible("build_schedule: rho_s fell to 1/10");
    if (2.0 * next.a > 2.0 * j0 - N || 2.0 * next.b < 2.0 * j0 + N) {
      throw ScheduleInfeasible("build_schedule: band [" + std::to_string(next.a) + "," + std::to_string(next.b) +
                               "] no longer contains [j0-N/2, j0+N/2] at step " + std::to_string(next.s));
    }
    sched.steps.push_back(next);
    cur = next;
  }
  sched.s_star = cur.s;
  return sched;
}

}  // namespace dnls
