#pragma once

// Finite-step normal form around the barrier bands +-[a_s, b_s].
//
// Step s removes every non-resonant term supported inside the step-s bands
// with |c(n)| > delta_{s+1} by a Lie transform  H -> exp(ad_F) H,
// ad_F G = {G, F}.  With frequencies w_j = 2 D_j one has
// {sum_j D_j |q_j|^2, M_n} = (Omega(n)/2) M_n,  Omega(n) = sum (n_j - n'_j) w_j,
// hence the generator coefficient -2 c(n) / Omega(n).

#include "dnls/lattice.hpp"
#include "dnls/polynomial.hpp"
#include "dnls/polynomial_flow.hpp"
#include "dnls/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnls {

class ResonanceViolation : public std::runtime_error {
 public:
  ResonanceViolation(int step, MultiIndex index, double divisor, double threshold)
      : std::runtime_error(describe(step, index, divisor, threshold)),
        step_(step),
        index_(std::move(index)),
        divisor_(divisor),
        threshold_(threshold) {}

  int step() const { return step_; }
  MultiIndex const& index() const { return index_; }
  double divisor() const { return divisor_; }
  double threshold() const { return threshold_; }

 private:
  static std::string describe(int step, MultiIndex const& n, double divisor, double threshold) {
    std::ostringstream os;
    os << "small divisor at step " << step << ": |Omega| = " << std::abs(divisor) << " <= " << threshold
       << " for index {";
    for (auto const& e : n.entries()) os << " (" << e.site << "," << e.q << "," << e.qbar << ")";
    os << " }";
    return os.str();
  }

  int step_;
  MultiIndex index_;
  double divisor_;
  double threshold_;
};

class SeriesDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Omega(n) = sum_j (n_j - n'_j) vtilde_j.
inline double small_divisor(MultiIndex const& n, DisorderRealization const& V) {
  double omega = 0.0;
  for (auto const& e : n.entries()) omega += (e.q - e.qbar) * V.modulated(e.site);
  return omega;
}

/// Omega(n) with the frequencies 2 D_j read off the diagonal of H.
inline double small_divisor(MultiIndex const& n, Hamiltonian const& H) {
  double omega = 0.0;
  for (auto const& e : n.entries()) omega += (e.q - e.qbar) * H.frequency(e.site);
  return omega;
}

struct GeneratorF {
  Hamiltonian F;
  int step = 0;
  std::vector<MultiIndex> targets;  // indices removed at this step, both members of each conjugate pair
  double min_divisor = 0.0;         // smallest |Omega| among targets (inf if none)
};

/// Generator of step s.  Throws ResonanceViolation, without producing a
/// partial generator, if any targeted index has |Omega| <= threshold_s.
inline GeneratorF build_generator(Hamiltonian const& Hs, NormalFormSchedule const& schedule, int s) {
  if (s < 1 || s >= schedule.s_star) throw std::invalid_argument("build_generator: step outside 1..s*-1");
  Bands const bands = schedule.bands(s);
  double const floor = schedule.delta(s + 1);
  double const threshold = schedule.step(s).divisor_threshold;

  GeneratorF g;
  g.step = s;
  g.min_divisor = std::numeric_limits<double>::infinity();
  for (auto const& [n, c] : Hs.sorted_terms()) {
    if (n.is_resonant() || !(std::abs(c) > floor) || !bands.contains(n)) continue;
    double const omega = small_divisor(n, Hs);
    if (!(std::abs(omega) > threshold)) throw ResonanceViolation(s, n, omega, threshold);
    g.min_divisor = std::min(g.min_divisor, std::abs(omega));
    g.targets.push_back(n);
    g.F.add_term(n, c * (-2.0 / omega));
  }
  return g;
}

struct LieTransformOptions {
  double tail_floor = 0.0;
  int diameter_cap = 1 << 20;
  int degree_cap = 1 << 20;
  int max_depth = 40;
};

struct LieTransformResult {
  Hamiltonian H;
  double dropped = 0.0;
  int depth = 0;
  std::vector<double> level_mass;  // l1 mass of each kept bracket level
};

/// H_{s+1} = H_s + {H_s,F} + 1/2! {{H_s,F},F} + ...  Each level is pruned at
/// the tail floor and caps; the series stops at the first level whose total
/// l1 mass is below the floor, which is charged twice (itself plus the
/// geometric tail) to the remainder.
inline LieTransformResult lie_transform(Hamiltonian const& Hs, Hamiltonian const& F,
                                        LieTransformOptions const& opt) {
  LieTransformResult out;
  out.H = Hs;
  if (F.empty()) return out;

  Hamiltonian level = Hs;
  double dropped = 0.0;
  for (int k = 1;; ++k) {
    if (k > opt.max_depth) {
      throw SeriesDivergence("lie_transform: series did not contract within depth " + std::to_string(opt.max_depth));
    }
    level = poisson_bracket(level, F).scaled(Complex{1.0 / k, 0.0});
    double const mass = level.l1_mass();
    if (!std::isfinite(mass) || mass > 1e12) throw SeriesDivergence("lie_transform: bracket series blew up");
    if (mass < opt.tail_floor) {
      dropped += 2.0 * mass;
      out.depth = k;
      break;
    }
    auto [kept, cut] = prune(std::move(level), opt.tail_floor, opt.diameter_cap, opt.degree_cap);
    dropped += cut;
    level = std::move(kept);
    level.add_remainder(-level.remainder_norm());
    out.level_mass.push_back(level.l1_mass());
    out.H += level;
  }
  // Exact cancellations leave roundoff residues; sweep them into the remainder.
  auto [clean, residue] = prune(std::move(out.H), opt.tail_floor, opt.diameter_cap, opt.degree_cap);
  out.H = std::move(clean);
  out.H.add_remainder(dropped);
  out.dropped = dropped + residue;
  return out;
}

struct FrequencyShift {
  Hamiltonian H;
  std::map<int, double> w;  // shift of the frequency 2 D_j
  std::vector<int> violations;  // sites with |w_j| >= bound
};

/// Moves every |q_j|^2 term into the diagonal.
inline FrequencyShift extract_frequency_shift(Hamiltonian H, double bound = std::numeric_limits<double>::infinity()) {
  FrequencyShift out;
  std::vector<std::pair<int, double>> moved;
  for (auto const& [n, c] : H.terms()) {
    if (n.support_size() == 1 && n.entries()[0].q == 1 && n.entries()[0].qbar == 1) {
      moved.emplace_back(n.entries()[0].site, c.real());
    }
  }
  std::sort(moved.begin(), moved.end());
  for (auto const& [j, c] : moved) {
    H.erase_term(MultiIndex::square_modulus(j));
    H.add_diagonal(j, c);
    out.w[j] += 2.0 * c;
  }
  for (auto const& [j, w] : out.w) {
    if (!(std::abs(w) < bound)) out.violations.push_back(j);
  }
  out.H = std::move(H);
  return out;
}

struct StepReport {
  int s = 0;
  std::size_t targets = 0;
  double min_divisor = 0.0;
  double threshold = 0.0;
  double dropped = 0.0;
  int series_depth = 0;
  std::size_t term_count = 0;
  double max_new_coeff = 0.0;    // largest generated non-targeted coefficient meeting the bands
  double bracket_bound = 0.0;    // delta_{s+1}
  std::size_t shift_violations = 0;
  std::vector<MultiIndex> cancellation_violations;  // |c| > delta_{s+1} meeting bands_{s+1}
  double max_band_coeff_next = 0.0;                 // max non-resonant |c| meeting bands_{s+1}
};

struct BarrierReport {
  int a = 0;
  int b = 0;
  double eps_A = 0.0;
  double max_band_coeff = 0.0;
  std::vector<MultiIndex> violations;
};

struct NormalFormOptions {
  std::optional<double> tail_floor;  // default eps^(2A)
  int max_depth = 40;
};

struct NormalFormResult {
  Hamiltonian H;
  DisorderRealization V;  // with the accumulated shift W
  NormalFormSchedule schedule;
  std::vector<GeneratorF> generators;
  std::vector<StepReport> steps;
  BarrierReport barrier;
  std::vector<NormViolation> decay_violations;
  std::vector<int> shift_support_violations;
  double remainder_norm = 0.0;

  bool certified() const {
    if (!barrier.violations.empty() || !decay_violations.empty() || !shift_support_violations.empty()) return false;
    return std::all_of(steps.begin(), steps.end(),
                       [](StepReport const& r) { return r.cancellation_violations.empty(); });
  }

  double shift(int j) const { return V.shift(j); }
};

namespace detail {

inline double max_nonresonant_touching(Hamiltonian const& H, Bands const& bands,
                                       std::vector<MultiIndex>* above = nullptr, double bound = 0.0) {
  double m = 0.0;
  for (auto const& [n, c] : H.terms()) {
    if (n.is_resonant() || !bands.touches(n)) continue;
    double const mag = std::abs(c);
    m = std::max(m, mag);
    if (above != nullptr && mag > bound) above->push_back(n);
  }
  if (above != nullptr) std::sort(above->begin(), above->end());
  return m;
}

}  // namespace detail

/// Runs steps s = 1..s*-1; after the last step every non-resonant term meeting
/// the step-s* bands is below delta_{s*} < eps^A.
inline NormalFormResult run_normal_form(Hamiltonian const& H, DisorderRealization const& V, double eps, double A,
                                        int j0, int N, ScheduleConstants const& constants = ScheduleConstants::desk(),
                                        NormalFormOptions const& opt = {}) {
  NormalFormResult res;
  res.schedule = build_schedule(eps, A, j0, N, constants);
  res.V = V;
  NormalFormSchedule const& sched = res.schedule;

  LieTransformOptions lie;
  lie.tail_floor = opt.tail_floor.value_or(std::pow(eps, 2.0 * A));
  lie.diameter_cap = static_cast<int>(std::ceil(20.0 * A)) - 1;
  lie.degree_cap = static_cast<int>(std::ceil(20.0 * A)) - 1;
  lie.max_depth = opt.max_depth;

  Hamiltonian current = H;
  for (int s = 1; s < sched.s_star; ++s) {
    StepReport rep;
    rep.s = s;
    rep.threshold = sched.step(s).divisor_threshold;
    rep.bracket_bound = sched.delta(s + 1);

    GeneratorF g = build_generator(current, sched, s);
    rep.targets = g.targets.size();
    rep.min_divisor = g.min_divisor;

    LieTransformResult lt = lie_transform(current, g.F, lie);
    rep.dropped = lt.dropped;
    rep.series_depth = lt.depth;

    for (auto const& [n, c] : lt.H.terms()) {
      if (n.is_resonant()) continue;
      if (std::abs(current.coefficient(n) - c) <= 0.0) continue;
      if (std::binary_search(g.targets.begin(), g.targets.end(), n)) continue;
      rep.max_new_coeff = std::max(rep.max_new_coeff, std::abs(c - current.coefficient(n)));
    }

    FrequencyShift fs = extract_frequency_shift(std::move(lt.H), sched.delta(s + 1));
    rep.shift_violations = fs.violations.size();
    for (auto const& [j, w] : fs.w) {
      if (res.V.box.contains(j)) res.V.w[res.V.box.offset(j)] += w;
    }
    current = std::move(fs.H);
    rep.term_count = current.term_count();
    rep.max_band_coeff_next =
        detail::max_nonresonant_touching(current, sched.bands(s + 1), &rep.cancellation_violations, sched.delta(s + 1));

    std::sort(g.targets.begin(), g.targets.end());
    res.generators.push_back(std::move(g));
    res.steps.push_back(std::move(rep));
  }

  Bands const final_bands = sched.bands(sched.s_star);
  res.barrier.a = final_bands.a;
  res.barrier.b = final_bands.b;
  res.barrier.eps_A = sched.target_accuracy();
  res.barrier.max_band_coeff =
      detail::max_nonresonant_touching(current, final_bands, &res.barrier.violations, sched.target_accuracy());
  // max_nonresonant_touching flags |c| > bound; the barrier needs |c| < eps^A.
  for (auto const& [n, c] : current.terms()) {
    if (!n.is_resonant() && final_bands.touches(n) && std::abs(c) == sched.target_accuracy()) {
      res.barrier.violations.push_back(n);
    }
  }
  res.decay_violations = weighted_norm_check(current, sched.step(sched.s_star).rho, eps);

  for (int j = -res.V.box.half_width; j <= res.V.box.half_width; ++j) {
    int const dist = std::abs(std::abs(j) - j0);
    if (res.V.shift(j) != 0.0 && dist > N + 1) res.shift_support_violations.push_back(j);
  }
  res.remainder_norm = current.remainder_norm();
  res.H = std::move(current);
  return res;
}

/// Composite transformation  q -> Gamma_1(Gamma_2(... Gamma_{s*-1}(q))),
/// so that H'(q) = H(Gamma(q)) up to the remainder.
inline State apply_transformation(NormalFormResult const& res, State q, int steps_per_generator = 16) {
  for (auto it = res.generators.rbegin(); it != res.generators.rend(); ++it) {
    if (it->F.empty()) continue;
    q = generator_flow(it->F, std::move(q), 1.0, steps_per_generator);
  }
  return q;
}

}  // namespace dnls
