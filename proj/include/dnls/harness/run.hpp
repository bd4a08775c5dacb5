#pragma once

// Experiment orchestration.  Every run returns its artifacts in memory;
// write_artifacts() is the single writer.

#include "dnls/dynamics.hpp"
#include "dnls/harness/config.hpp"
#include "dnls/io.hpp"
#include "dnls/measure.hpp"
#include "dnls/normal_form.hpp"
#include "dnls/parallel.hpp"
#include "dnls/sensitivity.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace dnls::harness {

enum class ExitStatus : int { pass = 0, certificate_failure = 1, config_error = 2, numerical_abort = 3 };

inline ExitStatus worst(ExitStatus a, ExitStatus b) {
  auto rank = [](ExitStatus s) {
    switch (s) {
      case ExitStatus::pass: return 0;
      case ExitStatus::certificate_failure: return 1;
      case ExitStatus::config_error: return 2;
      case ExitStatus::numerical_abort: return 3;
    }
    return 3;
  };
  return rank(a) >= rank(b) ? a : b;
}

struct Artifact {
  std::string name;  // relative path
  std::string content;
};

struct RunReport {
  json summary;
  std::map<std::string, double> metrics;  // flat numbers for sweeps
  std::vector<Artifact> artifacts;        // includes the summary
  ExitStatus status = ExitStatus::pass;
};

inline void write_artifacts(RunReport const& r, std::filesystem::path const& dir) {
  for (auto const& a : r.artifacts) {
    auto const p = dir / a.name;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << a.content;
  }
}

namespace detail {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string csv_header_comment(ExperimentConfig const& c) { return "# config: " + config_echo(c).dump() + "\n"; }

inline DisorderRealization potential_for(ExperimentConfig const& c, std::uint64_t seed) {
  if (!c.potential) return sample_potential(seed, c.box());
  DisorderRealization V(c.box(), seed);
  V.v = *c.potential;
  return V;
}

inline ScanParameters scan_parameters(ExperimentConfig const& c) {
  ScanParameters p;
  p.eps = c.eps();
  p.A = c.A;
  p.N = *c.N;
  p.constants = ScheduleConstants::desk();
  p.screen.max_degree = c.screen_degree;
  p.screen.max_diameter = c.screen_diameter;
  return p;
}

/// Fixed j0, the scan, or (eps = 0) jbar0 since no divisor is ever used.
inline std::optional<int> choose_j0(ExperimentConfig const& c, DisorderRealization const& V) {
  if (c.j0) return c.j0;
  if (c.eps() == 0.0) return c.jbar0;
  return scan_j0(V, *c.jbar0, scan_parameters(c));
}

inline void finish(RunReport& r, ExperimentConfig const& c, std::string const& stem) {
  r.summary["config"] = config_echo(c);
  r.summary["status"] = static_cast<int>(r.status);
  json m = json::object();
  for (auto const& [k, v] : r.metrics) m[k] = v;
  r.summary["metrics"] = m;
  r.artifacts.push_back({stem + "_summary.json", r.summary.dump(2) + "\n"});
}

inline std::string seed_name(std::string const& stem, std::uint64_t seed) { return stem + "_seed" + std::to_string(seed); }

}  // namespace detail

// ---- normal-form / verify -------------------------------------------------

struct SeedCertificate {
  std::uint64_t seed = 0;
  std::optional<int> j0;
  std::string outcome;  // certified | failed | scan_failure | resonance | numerical_abort
  json report;
  double remainder_norm = 0.0;
  double max_band_coeff = 0.0;
};

inline RunReport run_certificates(ExperimentConfig c, bool with_sensitivity) {
  resolve(c);
  std::string const stem = with_sensitivity ? "verify" : "normal_form";
  std::vector<SeedCertificate> out(c.seeds.size());
  std::vector<std::string> hamiltonians(c.seeds.size());

  if (c.eps() > 0.0) build_schedule(c.eps(), c.A, c.j0.value_or(*c.jbar0), *c.N, ScheduleConstants::desk());

  parallel_for(c.seeds.size(), c.threads, [&](std::size_t i) {
    SeedCertificate& sc = out[i];
    sc.seed = c.seeds[i];
    DisorderRealization const V = detail::potential_for(c, sc.seed);
    sc.j0 = detail::choose_j0(c, V);
    json rep{{"seed", sc.seed}, {"j0", sc.j0 ? json(*sc.j0) : json(nullptr)}};
    if (!sc.j0) {
      sc.outcome = "scan_failure";
    } else if (c.eps() == 0.0) {
      // nothing to transform: H is already in normal form
      sc.outcome = "certified";
      rep["normal_form"] = {{"s_star", 1}, {"schedule", json::array()}, {"violations", json::array()},
                            {"remainder_norm", 0.0}, {"certified", true},
                            {"barrier", {{"a", *sc.j0 - *c.N}, {"b", *sc.j0 + *c.N}, {"eps_A", 0.0},
                                         {"max_band_coeff", 0.0}}},
                            {"W", json::array()}};
      if (!with_sensitivity) hamiltonians[i] = to_json(build_initial_hamiltonian(V, 0.0, 0.0, c.box())).dump() + "\n";
    } else {
      try {
        Hamiltonian const H = build_initial_hamiltonian(V, c.eps1, c.eps2, c.box());
        NormalFormResult const res = run_normal_form(H, V, c.eps(), c.A, *sc.j0, *c.N);
        rep["normal_form"] = normal_form_report(res);
        sc.remainder_norm = res.remainder_norm;
        sc.max_band_coeff = res.barrier.max_band_coeff;
        bool ok = res.certified();
        if (ok && with_sensitivity) {
          SensitivityParameters sp;
          sp.eps1 = c.eps1;
          sp.eps2 = c.eps2;
          sp.A = c.A;
          sp.j0 = *sc.j0;
          sp.N = *c.N;
          SensitivityReport const sr = sensitivity_check(V, sp);
          rep["sensitivity"] = sensitivity_to_json(sr);
          ok = sr.norm_ok() && sr.det_ok();
        }
        sc.outcome = ok ? "certified" : "failed";
        if (!with_sensitivity) hamiltonians[i] = to_json(res.H).dump() + "\n";
      } catch (ResonanceViolation const& e) {
        sc.outcome = "resonance";
        rep["violation"] = {{"kind", "resonance"}, {"step", e.step()}, {"index", index_to_json(e.index())},
                            {"divisor", e.divisor()}, {"threshold", e.threshold()}, {"message", e.what()}};
      } catch (SeriesDivergence const& e) {
        sc.outcome = "numerical_abort";
        rep["violation"] = {{"kind", "divergence"}, {"message", e.what()}};
      } catch (NumericalAbort const& e) {
        sc.outcome = "numerical_abort";
        rep["violation"] = {{"kind", "numerical"}, {"message", e.what()}};
      }
    }
    rep["outcome"] = sc.outcome;
    sc.report = std::move(rep);
  });

  RunReport r;
  std::size_t accepted = 0, certified = 0, aborted = 0;
  double max_rem = 0.0, max_band = 0.0;
  json seeds = json::array();
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto const& sc = out[i];
    if (sc.outcome != "scan_failure") ++accepted;
    if (sc.outcome == "certified") ++certified;
    if (sc.outcome == "numerical_abort") ++aborted;
    max_rem = std::max(max_rem, sc.remainder_norm);
    max_band = std::max(max_band, sc.max_band_coeff);
    seeds.push_back({{"seed", sc.seed}, {"j0", sc.j0 ? json(*sc.j0) : json(nullptr)}, {"outcome", sc.outcome}});
    json full = sc.report;
    full["config"] = config_echo(c);
    r.artifacts.push_back({detail::seed_name(stem, sc.seed) + ".json", full.dump(2) + "\n"});
    if (!hamiltonians[i].empty()) r.artifacts.push_back({detail::seed_name(stem, sc.seed) + "_hamiltonian.json", hamiltonians[i]});
  }
  r.summary["seeds"] = seeds;
  r.metrics = {{"seeds", static_cast<double>(out.size())},
               {"accepted", static_cast<double>(accepted)},
               {"certified", static_cast<double>(certified)},
               {"max_remainder_norm", max_rem},
               {"max_band_coeff", max_band}};
  if (aborted > 0) {
    r.status = ExitStatus::numerical_abort;
  } else if (accepted == 0 || certified < accepted) {
    r.status = ExitStatus::certificate_failure;
  }
  detail::finish(r, c, stem);
  return r;
}

inline RunReport run_normal_form_mode(ExperimentConfig c) { return run_certificates(std::move(c), false); }
inline RunReport run_verify(ExperimentConfig c) { return run_certificates(std::move(c), true); }

// ---- simulate --------------------------------------------------------------

struct SeedTrajectory {
  std::uint64_t seed = 0;
  std::optional<int> j0;
  std::string outcome;  // success | leaked | scan_failure | numerical_abort
  ObserverSeries series;
  std::string snapshot;
  double t_end = 0.0;
};

inline IntegratorConfig integrator_config(ExperimentConfig const& c, int j0, double T) {
  IntegratorConfig ic;
  ic.dt = c.dt;
  ic.T = T;
  ic.samples = c.samples;
  ic.log_grid = true;
  ic.j0 = j0;
  ic.N = *c.N;
  return ic;
}

inline RunReport run_simulate(ExperimentConfig c) {
  resolve(c);
  LatticeBox const box = c.box();
  HoppingPropagator const prop(box);
  State const q0 = initial_datum(c);
  double const epsA = std::pow(c.eps(), c.A);

  std::vector<SeedTrajectory> traj(c.seeds.size());
  for (std::size_t i = 0; i < c.seeds.size(); ++i) traj[i].seed = c.seeds[i];
  parallel_for(c.seeds.size(), c.threads, [&](std::size_t i) {
    DisorderRealization const V = detail::potential_for(c, traj[i].seed);
    traj[i].j0 = detail::choose_j0(c, V);
    if (!traj[i].j0) traj[i].outcome = "scan_failure";
  });
  std::vector<std::size_t> accepted;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj[i].j0) accepted.push_back(i);
  }
  for (std::size_t i : accepted) {
    if (truncated_mass(q0, *traj[i].j0 - *c.N) >= c.delta) {
      throw ConfigError("initial datum has tail mass >= delta beyond j0 - N for seed " + std::to_string(traj[i].seed));
    }
  }

  // C_hat: max flux through j0 + N over eps^A on the first accepted seeds
  json calibration = nullptr;
  double T = c.T_max;
  bool capped = false;
  if (c.T) {
    T = *c.T;
  } else if (!accepted.empty() && epsA > 0.0) {
    std::size_t const k = std::min<std::size_t>(accepted.size(), static_cast<std::size_t>(c.calibration_seeds));
    std::vector<double> fmax(k, 0.0);
    std::vector<char> ok(k, 0);
    parallel_for(k, c.threads, [&](std::size_t m) {
      auto const& tr = traj[accepted[m]];
      DisorderRealization const V = detail::potential_for(c, tr.seed);
      try {
        auto const s = integrate(q0, V, c.eps1, c.eps2, integrator_config(c, *tr.j0, c.calibration_T), prop);
        fmax[m] = s.max_abs_flux;
        ok[m] = 1;
      } catch (IntegrationAborted const& e) {
        fmax[m] = e.series.max_abs_flux;
      }
    });
    double const flux = *std::max_element(fmax.begin(), fmax.end());
    double const C_hat = flux / epsA;
    json seeds = json::array();
    for (std::size_t m = 0; m < k; ++m) seeds.push_back(traj[accepted[m]].seed);
    calibration = {{"seeds", seeds}, {"T", c.calibration_T}, {"max_flux", flux}, {"C_hat", C_hat},
                   {"aborted", static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 0))}};
    double const T_theorem = C_hat > 0.0 ? c.delta / (epsA * C_hat) : std::numeric_limits<double>::infinity();
    calibration["T_theorem"] = std::isfinite(T_theorem) ? json(T_theorem) : json(nullptr);
    capped = !(T_theorem <= c.T_max);
    T = capped ? c.T_max : T_theorem;
  } else {
    capped = true;
  }

  parallel_for(accepted.size(), c.threads, [&](std::size_t m) {
    auto& tr = traj[accepted[m]];
    DisorderRealization const V = detail::potential_for(c, tr.seed);
    State fin;
    std::ostringstream snap;
    try {
      tr.series = integrate(q0, V, c.eps1, c.eps2, integrator_config(c, *tr.j0, T), prop, &fin);
      tr.outcome = tr.series.max_mass_outer < 2.0 * c.delta ? "success" : "leaked";
      tr.t_end = T;
      write_snapshot(snap, fin, T);
    } catch (IntegrationAborted const& e) {
      tr.series = e.series;
      tr.outcome = "numerical_abort";
      tr.t_end = e.t;
      write_snapshot(snap, e.last_good_state, e.t);
    }
    tr.snapshot = snap.str();
  });

  RunReport r;
  std::size_t successes = 0, aborted = 0;
  double leak_sum = 0.0, leak_max = 0.0;
  json seeds = json::array();
  for (auto const& tr : traj) {
    json s{{"seed", tr.seed}, {"j0", tr.j0 ? json(*tr.j0) : json(nullptr)}, {"outcome", tr.outcome}};
    if (tr.j0) {
      s["max_mass_outer"] = tr.series.max_mass_outer;
      s["leak_rate"] = tr.series.max_abs_flux;
      s["max_edge"] = tr.series.max_edge;
      s["dt"] = tr.series.dt;
      s["steps"] = tr.series.steps;
      s["t_end"] = tr.t_end;
      std::ostringstream csv;
      csv << detail::csv_header_comment(c);
      write_series_csv(csv, tr.series);
      r.artifacts.push_back({detail::seed_name("simulate", tr.seed) + ".csv", csv.str()});
      r.artifacts.push_back({detail::seed_name("simulate", tr.seed) + (tr.outcome == "numerical_abort" ? "_abort" : "_final") + ".bin",
                             tr.snapshot});
      if (tr.outcome == "success") ++successes;
      if (tr.outcome == "numerical_abort") ++aborted;
      leak_sum += tr.series.max_abs_flux;
      leak_max = std::max(leak_max, tr.series.max_abs_flux);
    }
    seeds.push_back(s);
  }
  std::size_t const n = accepted.size();
  auto const [lo, hi] = wilson_interval(successes, n);
  r.summary["seeds"] = seeds;
  r.summary["calibration"] = calibration;
  r.summary["T"] = T;
  r.summary["T_capped"] = capped;
  r.summary["success_wilson"] = {lo, hi};
  r.metrics = {{"seeds", static_cast<double>(traj.size())},
               {"accepted", static_cast<double>(n)},
               {"successes", static_cast<double>(successes)},
               {"success_fraction", n ? static_cast<double>(successes) / n : 0.0},
               {"mean_leak_rate", n ? leak_sum / n : 0.0},
               {"max_leak_rate", leak_max},
               {"T", T}};
  if (aborted > 0) {
    r.status = ExitStatus::numerical_abort;
  } else if (n == 0 || static_cast<double>(successes) < c.success_threshold * n) {
    r.status = ExitStatus::certificate_failure;
  }
  detail::finish(r, c, "simulate");
  return r;
}

// ---- measure ---------------------------------------------------------------

inline RunReport run_measure(ExperimentConfig c) {
  resolve(c);
  if (c.potential) throw ConfigError("measure samples potentials; a fixed potential makes no sense here");
  if (!(c.eps() > 0.0)) throw ConfigError("measure needs eps > 0");
  int const j0 = c.j0.value_or(*c.jbar0);
  NormalFormSchedule const sched = build_schedule(c.eps(), c.A, j0, *c.N, ScheduleConstants::desk());
  ConstraintLimits limits;
  limits.max_degree = c.screen_degree;
  limits.max_diameter = c.screen_diameter;
  ConstraintIndexSet set;
  try {
    set = enumerate_constraint_indices(sched, limits);
  } catch (EnumerationCapExceeded const& e) {
    throw ConfigError(std::string("constraint enumeration too large: ") + e.what());
  }
  std::uint64_t const base = c.seeds.front();

  struct Row {
    std::optional<int> j0;
    AcceptanceVerdict verdict;
  };
  std::vector<Row> rows(c.trials);
  parallel_for(c.trials, c.threads, [&](std::size_t t) {
    DisorderRealization const V = sample_potential(base + t, c.box());
    rows[t].j0 = detail::choose_j0(c, V);
    rows[t].verdict = acceptable_set_check(V, sched, set);
  });
  AcceptanceReport const mc = monte_carlo_acceptance(sched, set, c.trials, base, c.threads);

  RunReport r;
  std::ostringstream csv;
  csv << detail::csv_header_comment(c) << "seed,j0_found,pass,min_abs_omega,first_violation_step\n";
  std::size_t scan_ok = 0;
  for (std::size_t t = 0; t < rows.size(); ++t) {
    auto const& row = rows[t];
    if (row.j0) ++scan_ok;
    csv << base + t << ',' << (row.j0 ? std::to_string(*row.j0) : "") << ',' << (row.verdict.passed() ? 1 : 0) << ','
        << detail::num(row.verdict.min_abs_omega) << ','
        << (row.verdict.passed() ? "" : std::to_string(row.verdict.first_violation_step())) << '\n';
  }
  r.artifacts.push_back({"measure_trials.csv", csv.str()});

  // single-form battery at the step-1 threshold and at delta
  auto form = [&](std::initializer_list<SiteExponent> e) { return MultiIndex::canonicalize(e); };
  std::vector<MultiIndex> const forms{form({{j0, 1, 0}, {j0 + 1, 0, 1}}),
                                      form({{j0, 2, 0}, {j0 + 1, 0, 1}, {j0 + 2, 0, 1}}),
                                      form({{j0, 1, 0}, {j0 + 1, 1, 0}, {j0 + 2, 0, 2}})};
  std::vector<double> const deltas{sched.step(1).divisor_threshold, c.delta};
  json single = json::array();
  bool singles_ok = true;
  for (std::size_t f = 0; f < forms.size(); ++f) {
    for (double d : deltas) {
      SingleFormResult const sf = single_form_measure_test(forms[f], d, c.single_form_trials, base + 1);
      singles_ok = singles_ok && sf.within_bound();
      single.push_back({{"index", index_to_json(forms[f])}, {"delta", d}, {"estimate", sf.estimate},
                        {"sigma", sf.sigma}, {"bound", sf.bound}, {"within_bound", sf.within_bound()}});
    }
  }

  bool const union_ok = mc.failure_rate <= mc.union_bound + 3.0 * mc.failure_sigma;
  auto const [slo, shi] = wilson_interval(scan_ok, c.trials);
  r.summary["j0"] = j0;
  r.summary["schedule"] = schedule_to_json(sched);
  r.summary["acceptance"] = {{"trials", mc.trials},
                             {"accepted", mc.accepted},
                             {"p_accept", mc.p_accept},
                             {"wilson", {mc.wilson.first, mc.wilson.second}},
                             {"failure_rate", mc.failure_rate},
                             {"failure_sigma", mc.failure_sigma},
                             {"union_bound", mc.union_bound},
                             {"union_bound_holds", union_ok},
                             {"counts", mc.counts},
                             {"max_site_failure_rate", mc.max_site_failure_rate},
                             {"max_site_union_bound", mc.max_site_union_bound},
                             {"site_bounds_hold", mc.site_bounds_hold}};
  r.summary["scan"] = {{"found", scan_ok}, {"trials", c.trials}, {"wilson", {slo, shi}}};
  r.summary["single_forms"] = single;
  r.metrics = {{"p_accept", mc.p_accept},
               {"failure_rate", mc.failure_rate},
               {"union_bound", mc.union_bound},
               {"scan_success_rate", static_cast<double>(scan_ok) / c.trials}};
  if (!(union_ok && singles_ok && mc.site_bounds_hold)) r.status = ExitStatus::certificate_failure;
  detail::finish(r, c, "measure");
  return r;
}

// ---- sweep -----------------------------------------------------------------

inline RunReport run(ExperimentConfig c);

struct GridPoint {
  double eps1, eps2, A;
  std::string label() const {
    return "eps1=" + detail::num(eps1) + "_eps2=" + detail::num(eps2) + "_A=" + detail::num(A);
  }
  auto key() const { return std::tuple(eps1, eps2, A); }
};

inline std::vector<GridPoint> grid_points(ExperimentConfig const& c) {
  std::vector<std::pair<double, double>> eps;
  if (!c.grid.eps.empty()) {
    for (double e : c.grid.eps) eps.emplace_back(e / 2.0, e / 2.0);
  } else {
    auto e1 = c.grid.eps1.empty() ? std::vector<double>{c.eps1} : c.grid.eps1;
    auto e2 = c.grid.eps2.empty() ? std::vector<double>{c.eps2} : c.grid.eps2;
    for (double a : e1) {
      for (double b : e2) eps.emplace_back(a, b);
    }
  }
  auto As = c.grid.A.empty() ? std::vector<double>{c.A} : c.grid.A;
  std::vector<GridPoint> pts;
  for (auto [a, b] : eps) {
    for (double A : As) pts.push_back({a, b, A});
  }
  std::sort(pts.begin(), pts.end(), [](auto const& x, auto const& y) { return x.key() < y.key(); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](auto const& x, auto const& y) { return x.key() == y.key(); }),
            pts.end());
  return pts;
}

/// Least-squares slope of log y against log x.
inline std::optional<double> log_log_slope(std::vector<std::pair<double, double>> const& xy) {
  std::vector<std::pair<double, double>> p;
  for (auto [x, y] : xy) {
    if (x > 0.0 && y > 0.0) p.emplace_back(std::log(x), std::log(y));
  }
  if (p.size() < 2) return std::nullopt;
  double mx = 0.0, my = 0.0;
  for (auto [x, y] : p) {
    mx += x;
    my += y;
  }
  mx /= p.size();
  my /= p.size();
  double sxy = 0.0, sxx = 0.0;
  for (auto [x, y] : p) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
  }
  if (sxx == 0.0) return std::nullopt;
  return sxy / sxx;
}

inline RunReport run_sweep(ExperimentConfig c) {
  {
    ExperimentConfig check = c;
    resolve(check);
  }
  auto const pts = grid_points(c);
  std::vector<RunReport> sub(pts.size());
  unsigned const inner = pts.size() > 1 ? 1u : c.threads;
  parallel_for(pts.size(), c.threads, [&](std::size_t i) {
    ExperimentConfig s = c;
    s.mode = c.grid.target;
    s.grid = Grid{};
    s.eps1 = pts[i].eps1;
    s.eps2 = pts[i].eps2;
    s.A = pts[i].A;
    s.threads = inner;
    sub[i] = run(s);  // run() isolates failures into the report
  });

  RunReport r;
  std::ostringstream csv;
  csv << detail::csv_header_comment(c) << "eps1,eps2,A,metric,value\n";
  json points = json::array();
  std::map<double, std::vector<std::pair<double, double>>> leak;  // A -> (eps, mean leak rate)
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto const& p = pts[i];
    for (auto const& [k, v] : sub[i].metrics) {
      csv << detail::num(p.eps1) << ',' << detail::num(p.eps2) << ',' << detail::num(p.A) << ',' << k << ','
          << detail::num(v) << '\n';
    }
    for (auto const& a : sub[i].artifacts) r.artifacts.push_back({"point_" + p.label() + "/" + a.name, a.content});
    points.push_back({{"eps1", p.eps1}, {"eps2", p.eps2}, {"A", p.A}, {"status", static_cast<int>(sub[i].status)},
                      {"summary", sub[i].summary}});
    r.status = worst(r.status, sub[i].status);
    auto it = sub[i].metrics.find("mean_leak_rate");
    if (it != sub[i].metrics.end() && sub[i].metrics.at("accepted") > 0) leak[p.A].emplace_back(p.eps1 + p.eps2, it->second);
  }
  r.artifacts.push_back({"sweep_long.csv", csv.str()});
  json slopes = json::array();
  for (auto const& [A, xy] : leak) {
    auto const s = log_log_slope(xy);
    slopes.push_back({{"A", A}, {"points", xy.size()}, {"slope", s ? json(*s) : json(nullptr)}});
    if (s && leak.size() == 1) r.metrics["leak_rate_slope"] = *s;
  }
  r.summary["points"] = points;
  r.summary["leak_rate_slopes"] = slopes;
  r.metrics["points"] = static_cast<double>(pts.size());
  detail::finish(r, c, "sweep");
  return r;
}

// ---- dispatch --------------------------------------------------------------

/// Runs the configured mode.  Configuration problems come back as a report
/// with status config_error instead of an exception.
inline RunReport run(ExperimentConfig c) {
  try {
    switch (c.mode) {
      case Mode::simulate: return run_simulate(std::move(c));
      case Mode::normal_form: return run_normal_form_mode(std::move(c));
      case Mode::measure: return run_measure(std::move(c));
      case Mode::sweep: return run_sweep(std::move(c));
      case Mode::verify: return run_verify(std::move(c));
    }
  } catch (ConfigError const& e) {
    RunReport r;
    r.status = ExitStatus::config_error;
    r.summary = {{"error", e.what()}, {"mode", to_string(c.mode)}};
    return r;
  } catch (ScheduleInfeasible const& e) {
    RunReport r;
    r.status = ExitStatus::config_error;
    r.summary = {{"error", e.what()}, {"mode", to_string(c.mode)}};
    return r;
  } catch (std::invalid_argument const& e) {
    RunReport r;
    r.status = ExitStatus::config_error;
    r.summary = {{"error", e.what()}, {"mode", to_string(c.mode)}};
    return r;
  }
  return {};
}

}  // namespace dnls::harness
