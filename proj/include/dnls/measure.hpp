#pragma once

// Non-resonance constraints on the frequencies and Monte Carlo estimates of
// the measure of the acceptable set.

#include "dnls/disorder.hpp"
#include "dnls/lattice.hpp"
#include "dnls/multi_index.hpp"
#include "dnls/normal_form.hpp"
#include "dnls/parallel.hpp"
#include "dnls/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnls {

class EnumerationCapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Degree and diameter limits of a constraint family.  Unset fields take the
/// values of the schedule: |n| <= 20A and Delta(n) < diameter_cap(s).
struct ConstraintLimits {
  std::optional<int> max_degree;
  std::optional<int> max_diameter;  // inclusive
  std::size_t cap = 10'000'000;

  /// The family divided by the step-1 generator: hopping pairs.
  static ConstraintLimits hopping() { return {2, 1}; }
};

/// Per step s (index s-1): one representative n < conj(n) of each
/// non-resonant, gauge-balanced index inside the step-s bands.
struct ConstraintIndexSet {
  std::vector<std::vector<MultiIndex>> per_step;

  std::size_t size() const {
    std::size_t n = 0;
    for (auto const& v : per_step) n += v.size();
    return n;
  }
};

inline int j_plus(MultiIndex const& n) {
  for (auto it = n.entries().rbegin(); it != n.entries().rend(); ++it) {
    if (it->q != it->qbar) return it->site;
  }
  throw std::invalid_argument("j_plus: resonant index");
}

namespace detail {

// Exponent assignments on sites[first..last] (sorted, possibly with a gap
// between the two bands) with both endpoints occupied, total degree <=
// max_degree, balanced and non-resonant.
inline void enumerate_window(std::vector<int> const& sites, std::size_t first, std::size_t last, int max_degree,
                             std::size_t cap, std::vector<MultiIndex>& out) {
  std::vector<SiteExponent> cur;
  auto rec = [&](auto&& self, std::size_t i, int degree, int balance, bool unbalanced) -> void {
    if (i > last) {
      if (balance == 0 && unbalanced) {
        MultiIndex n = MultiIndex::from_sorted(cur);
        if (n < n.conjugate()) {
          out.push_back(std::move(n));
          if (out.size() > cap) {
            throw EnumerationCapExceeded("enumerate_constraint_indices: more than " + std::to_string(cap) +
                                         " indices; reduce A or the limits");
          }
        }
      }
      return;
    }
    bool const endpoint = i == first || i == last;
    int const left = max_degree - degree;
    for (int q = 0; q <= left; ++q) {
      for (int qb = 0; q + qb <= left; ++qb) {
        if (q == 0 && qb == 0) {
          if (endpoint) continue;
          self(self, i + 1, degree, balance, unbalanced);
          continue;
        }
        cur.push_back({sites[i], q, qb});
        self(self, i + 1, degree + q + qb, balance + q - qb, unbalanced || q != qb);
        cur.pop_back();
      }
    }
  };
  rec(rec, first, 0, 0, false);
}

}  // namespace detail

/// Balanced non-resonant indices with support in the bands, degree <=
/// max_degree and diameter <= max_diameter; one of each conjugate pair.
inline std::vector<MultiIndex> enumerate_band_indices(Bands const& bands, int max_degree, int max_diameter,
                                                      std::size_t cap = 10'000'000) {
  std::vector<MultiIndex> out;
  if (bands.b < bands.a || max_degree < 2 || max_diameter < 0) return out;
  std::vector<int> sites;
  for (int j = -bands.b; j <= -bands.a; ++j) sites.push_back(j);
  for (int j = bands.a; j <= bands.b; ++j) sites.push_back(j);
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  for (std::size_t lo = 0; lo < sites.size(); ++lo) {
    for (std::size_t hi = lo; hi < sites.size() && sites[hi] - sites[lo] <= max_diameter; ++hi) {
      detail::enumerate_window(sites, lo, hi, max_degree, cap, out);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline ConstraintIndexSet enumerate_constraint_indices(NormalFormSchedule const& schedule,
                                                       ConstraintLimits const& limits = {}) {
  ConstraintIndexSet set;
  std::size_t total = 0;
  for (int s = 1; s <= schedule.s_star; ++s) {
    int const degree = limits.max_degree.value_or(static_cast<int>(std::floor(20.0 * schedule.A)));
    // Delta(n) < cap  <=>  Delta(n) <= ceil(cap) - 1
    int const diameter =
        limits.max_diameter.value_or(static_cast<int>(std::ceil(schedule.diameter_cap(s))) - 1);
    auto idx = enumerate_band_indices(schedule.bands(s), degree, diameter, limits.cap - total);
    total += idx.size();
    set.per_step.push_back(std::move(idx));
  }
  return set;
}

struct ConstraintViolation {
  int s = 0;
  MultiIndex index;
  double omega = 0.0;
};

struct AcceptanceVerdict {
  std::vector<ConstraintViolation> violations;
  double min_abs_omega = std::numeric_limits<double>::infinity();
  bool passed() const { return violations.empty(); }
  int first_violation_step() const { return violations.empty() ? 0 : violations.front().s; }
};

/// Checks |Omega(n)| > threshold_s for every enumerated (s, n).  With
/// stop_at_first the scan ends at the first violation.
inline AcceptanceVerdict acceptable_set_check(DisorderRealization const& V, NormalFormSchedule const& schedule,
                                              ConstraintIndexSet const& set, bool stop_at_first = false) {
  AcceptanceVerdict out;
  for (std::size_t k = 0; k < set.per_step.size(); ++k) {
    int const s = static_cast<int>(k) + 1;
    double const threshold = schedule.step(s).divisor_threshold;
    for (auto const& n : set.per_step[k]) {
      double const omega = small_divisor(n, V);
      out.min_abs_omega = std::min(out.min_abs_omega, std::abs(omega));
      if (!(std::abs(omega) > threshold)) {
        out.violations.push_back({s, n, omega});
        if (stop_at_first) return out;
      }
    }
  }
  return out;
}

struct ScanParameters {
  double eps = 0.0;
  double A = 2.0;
  int N = 32;
  ScheduleConstants constants = ScheduleConstants::desk();
  ConstraintLimits screen = ConstraintLimits::hopping();
};

/// Candidate barrier centres jbar0, jbar0 + 2N, ... <= 2 jbar0.
inline std::vector<int> scan_candidates(int jbar0, int N) {
  if (jbar0 < 2 * N) throw std::invalid_argument("scan_j0: jbar0 must be at least 2N");
  std::vector<int> out;
  for (int j0 = jbar0; j0 <= 2 * jbar0; j0 += 2 * N) out.push_back(j0);
  return out;
}

/// First candidate whose step-1 constraints hold for the unmodulated V.
inline std::optional<int> scan_j0(DisorderRealization const& V, int jbar0, ScanParameters const& p) {
  for (int j0 : scan_candidates(jbar0, p.N)) {
    NormalFormSchedule const sched = build_schedule(p.eps, p.A, j0, p.N, p.constants);
    NormalFormSchedule first = sched;
    first.steps.resize(1);
    first.s_star = 1;
    ConstraintIndexSet const set = enumerate_constraint_indices(first, p.screen);
    if (acceptable_set_check(V, sched, set, true).passed()) return j0;
  }
  return std::nullopt;
}

struct ProportionEstimate {
  std::size_t successes = 0;
  std::size_t trials = 0;
  double p() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / trials; }
  double sigma() const { return trials == 0 ? 0.0 : std::sqrt(p() * (1.0 - p()) / trials); }
};

/// Wilson score interval (z = 1.96 by default).
inline std::pair<double, double> wilson_interval(std::size_t successes, std::size_t trials, double z = 1.96) {
  if (trials == 0) return {0.0, 1.0};
  double const n = static_cast<double>(trials);
  double const ph = successes / n;
  double const denom = 1.0 + z * z / n;
  double const centre = (ph + z * z / (2.0 * n)) / denom;
  double const half = z * std::sqrt(ph * (1.0 - ph) / n + z * z / (4.0 * n * n)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct SingleFormResult {
  double estimate = 0.0;
  double sigma = 0.0;
  double bound = 0.0;  // 2 delta / |n_k - n'_k| at k = j_plus(n)
  bool within_bound() const { return estimate <= bound + 3.0 * sigma; }
};

/// P(|Omega(n)| < delta) for i.i.d. uniform frequencies on supp n.
inline SingleFormResult single_form_measure_test(MultiIndex const& n, double delta, std::size_t trials,
                                                 std::uint64_t seed = 1) {
  int const k = j_plus(n);
  SingleFormResult r;
  r.bound = 2.0 * delta / std::abs(n.at(k).q - n.at(k).qbar);
  if (trials == 0) return r;
  std::size_t hits = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    double omega = 0.0;
    for (auto const& e : n.entries()) {
      omega += (e.q - e.qbar) * counter_uniform(seed, t, static_cast<std::uint64_t>(static_cast<std::int64_t>(e.site)));
    }
    if (std::abs(omega) < delta) ++hits;
  }
  r.estimate = static_cast<double>(hits) / trials;
  r.sigma = std::sqrt(std::max(r.estimate * (1.0 - r.estimate), 1.0 / trials) / trials);
  return r;
}

struct AcceptanceReport {
  std::size_t trials = 0;
  std::size_t accepted = 0;
  double p_accept = 0.0;
  std::pair<double, double> wilson{0.0, 1.0};
  double failure_rate = 0.0;
  double failure_sigma = 0.0;
  double union_bound = 0.0;               // 2 sum_s count_s theta_s
  std::vector<std::size_t> counts;        // constraints per step
  double max_site_failure_rate = 0.0;     // max over k of the empirical P(S_k^c)
  double max_site_union_bound = 0.0;      // union bound of the site attaining it
  bool site_bounds_hold = true;           // every site within its bound + 3 sigma
  std::vector<char> per_trial_pass;       // trial order
};

/// Monte Carlo estimate of P(S) over trials i.i.d. potentials (trial t uses
/// seed base_seed + t) together with the union bound from the enumeration.
inline AcceptanceReport monte_carlo_acceptance(NormalFormSchedule const& schedule, ConstraintIndexSet const& set,
                                               std::size_t trials, std::uint64_t base_seed = 0,
                                               unsigned threads = 1) {
  AcceptanceReport rep;
  rep.trials = trials;
  int const L = schedule.j0 + schedule.N + 1;
  LatticeBox const box(L);

  // constraints grouped by j_plus for the per-site view
  std::vector<int> sites;
  std::vector<double> site_bound;
  for (std::size_t k = 0; k < set.per_step.size(); ++k) {
    double const theta = schedule.step(static_cast<int>(k) + 1).divisor_threshold;
    rep.counts.push_back(set.per_step[k].size());
    for (auto const& n : set.per_step[k]) {
      int const jp = j_plus(n);
      double const b = 2.0 * theta;  // P(|Omega| <= theta) <= 2 theta / |n_k - n'_k| <= 2 theta
      rep.union_bound += b;
      auto it = std::lower_bound(sites.begin(), sites.end(), jp);
      std::size_t const pos = static_cast<std::size_t>(it - sites.begin());
      if (it == sites.end() || *it != jp) {
        sites.insert(it, jp);
        site_bound.insert(site_bound.begin() + static_cast<std::ptrdiff_t>(pos), 0.0);
      }
      site_bound[pos] += b;
    }
  }

  std::vector<char> pass(trials, 0);
  std::vector<std::vector<char>> site_fail(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    DisorderRealization const V = sample_potential(base_seed + t, box);
    AcceptanceVerdict const verdict = acceptable_set_check(V, schedule, set);
    pass[t] = verdict.passed() ? 1 : 0;
    site_fail[t].assign(sites.size(), 0);
    for (auto const& v : verdict.violations) {
      auto it = std::lower_bound(sites.begin(), sites.end(), j_plus(v.index));
      site_fail[t][static_cast<std::size_t>(it - sites.begin())] = 1;
    }
  });

  for (char c : pass) rep.accepted += static_cast<std::size_t>(c);
  rep.per_trial_pass = pass;
  rep.p_accept = trials == 0 ? 1.0 : static_cast<double>(rep.accepted) / trials;
  rep.wilson = wilson_interval(rep.accepted, trials);
  rep.failure_rate = 1.0 - rep.p_accept;
  rep.failure_sigma = trials == 0 ? 0.0 : std::sqrt(std::max(rep.failure_rate * rep.p_accept, 1.0 / trials) / trials);

  for (std::size_t i = 0; i < sites.size(); ++i) {
    std::size_t fails = 0;
    for (std::size_t t = 0; t < trials; ++t) fails += static_cast<std::size_t>(site_fail[t][i]);
    double const rate = trials == 0 ? 0.0 : static_cast<double>(fails) / trials;
    double const sigma = trials == 0 ? 0.0 : std::sqrt(std::max(rate * (1.0 - rate), 1.0 / trials) / trials);
    if (rate > site_bound[i] + 3.0 * sigma) rep.site_bounds_hold = false;
    if (rate >= rep.max_site_failure_rate) {
      rep.max_site_failure_rate = rate;
      rep.max_site_union_bound = site_bound[i];
    }
  }
  return rep;
}

}  // namespace dnls
