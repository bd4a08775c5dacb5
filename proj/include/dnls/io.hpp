#pragma once

// JSON forms of Hamiltonians and normal-form reports.

#include "dnls/normal_form.hpp"
#include "dnls/sensitivity.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace dnls {

using json = nlohmann::json;

inline json index_to_json(MultiIndex const& n) {
  json sites = json::array(), q = json::array(), qb = json::array();
  for (auto const& e : n.entries()) {
    sites.push_back(e.site);
    q.push_back(e.q);
    qb.push_back(e.qbar);
  }
  return {{"sites", sites}, {"n", q}, {"nprime", qb}};
}

inline MultiIndex index_from_json(json const& j) {
  auto const sites = j.at("sites").get<std::vector<int>>();
  auto const q = j.at("n").get<std::vector<int>>();
  auto const qb = j.at("nprime").get<std::vector<int>>();
  if (sites.size() != q.size() || sites.size() != qb.size()) {
    throw std::invalid_argument("index_from_json: sites, n and nprime differ in length");
  }
  std::vector<SiteExponent> raw;
  for (std::size_t i = 0; i < sites.size(); ++i) raw.push_back({sites[i], q[i], qb[i]});
  return MultiIndex::canonicalize(std::move(raw));
}

/// {"terms": [{sites, n, nprime, re, im}, ...] sorted by index,
///  "diagonal_sites": [...], "diagonal": [...], "remainder_norm": r}
inline json to_json(Hamiltonian const& H) {
  json terms = json::array();
  for (auto const& [n, c] : H.sorted_terms()) {
    json t = index_to_json(n);
    t["re"] = c.real();
    t["im"] = c.imag();
    terms.push_back(std::move(t));
  }
  json sites = json::array(), diag = json::array();
  for (auto const& [j, d] : H.diagonal()) {
    sites.push_back(j);
    diag.push_back(d);
  }
  return {{"terms", terms}, {"diagonal_sites", sites}, {"diagonal", diag}, {"remainder_norm", H.remainder_norm()}};
}

inline Hamiltonian hamiltonian_from_json(json const& j) {
  Hamiltonian H;
  for (auto const& t : j.at("terms")) {
    H.add_term(index_from_json(t), Complex{t.at("re").get<double>(), t.at("im").get<double>()});
  }
  auto const sites = j.value("diagonal_sites", std::vector<int>{});
  auto const diag = j.value("diagonal", std::vector<double>{});
  if (sites.size() != diag.size()) throw std::invalid_argument("hamiltonian_from_json: diagonal length mismatch");
  for (std::size_t i = 0; i < sites.size(); ++i) H.add_diagonal(sites[i], diag[i]);
  H.add_remainder(j.value("remainder_norm", 0.0));
  return H;
}

inline json schedule_to_json(NormalFormSchedule const& s) {
  json steps = json::array();
  for (auto const& st : s.steps) {
    steps.push_back({{"s", st.s},
                     {"delta", st.delta},
                     {"rho", st.rho},
                     {"a", st.a},
                     {"b", st.b},
                     {"divisor_threshold", st.divisor_threshold}});
  }
  return steps;
}

/// {schedule, barrier{a,b,eps_A,max_band_coeff}, W, remainder_norm,
///  violations, steps, certified}
inline json normal_form_report(NormalFormResult const& r) {
  json out;
  out["schedule"] = schedule_to_json(r.schedule);
  out["s_star"] = r.schedule.s_star;
  out["barrier"] = {{"a", r.barrier.a},
                    {"b", r.barrier.b},
                    {"eps_A", r.barrier.eps_A},
                    {"max_band_coeff", r.barrier.max_band_coeff}};

  json W = json::array();
  int const j0 = r.schedule.j0, N = r.schedule.N;
  for (int j = -(j0 + N + 1); j <= j0 + N + 1; ++j) {
    if (std::abs(std::abs(j) - j0) <= N + 1) W.push_back({{"site", j}, {"w", r.shift(j)}});
  }
  out["W"] = W;
  out["remainder_norm"] = r.remainder_norm;

  json viol = json::array();
  for (auto const& st : r.steps) {
    for (auto const& n : st.cancellation_violations) {
      viol.push_back({{"kind", "cancellation"}, {"step", st.s}, {"index", index_to_json(n)},
                      {"value", std::abs(r.H.coefficient(n))}});
    }
  }
  for (auto const& n : r.barrier.violations) {
    viol.push_back({{"kind", "barrier"}, {"index", index_to_json(n)}, {"value", std::abs(r.H.coefficient(n))},
                    {"bound", r.barrier.eps_A}});
  }
  for (auto const& v : r.decay_violations) {
    viol.push_back({{"kind", "decay"}, {"index", index_to_json(v.index)}, {"value", v.magnitude}, {"bound", v.bound}});
  }
  for (int j : r.shift_support_violations) viol.push_back({{"kind", "shift_support"}, {"site", j}});
  out["violations"] = viol;

  json steps = json::array();
  for (auto const& st : r.steps) {
    steps.push_back({{"s", st.s},
                     {"targets", st.targets},
                     {"min_divisor", st.min_divisor},
                     {"threshold", st.threshold},
                     {"dropped", st.dropped},
                     {"series_depth", st.series_depth},
                     {"term_count", st.term_count},
                     {"max_band_coeff_next", st.max_band_coeff_next},
                     {"bracket_bound", st.bracket_bound}});
  }
  out["steps"] = steps;
  out["certified"] = r.certified();
  return out;
}

inline json sensitivity_to_json(SensitivityReport const& s) {
  return {{"dW_norm", s.dW_norm},
          {"threshold", s.threshold},
          {"max_resonant_gradient", s.max_resonant_gradient},
          {"max_nonresonant_gradient", s.max_nonresonant_gradient},
          {"jacobian_det", s.jacobian_det},
          {"det_bracket", {s.det_lower, s.det_upper}},
          {"failed_probes", s.failed_probes},
          {"norm_ok", s.norm_ok()},
          {"det_ok", s.det_ok()},
          {"gradient_ok", s.gradient_ok()}};
}

}  // namespace dnls
