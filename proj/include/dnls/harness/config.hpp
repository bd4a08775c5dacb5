#pragma once

// Experiment configuration: JSON parsing, validation, resolution of the
// derived parameters, and the canonical echo embedded in every artifact.

#include "dnls/disorder.hpp"
#include "dnls/lattice.hpp"
#include "dnls/schedule.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dnls::harness {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { simulate, normal_form, measure, sweep, verify };

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::simulate: return "simulate";
    case Mode::normal_form: return "normal-form";
    case Mode::measure: return "measure";
    case Mode::sweep: return "sweep";
    case Mode::verify: return "verify";
  }
  return "?";
}

inline Mode parse_mode(std::string const& s) {
  for (Mode m : {Mode::simulate, Mode::normal_form, Mode::measure, Mode::sweep, Mode::verify}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

/// "a..b", inclusive.
inline std::vector<std::uint64_t> parse_seed_range(std::string const& s) {
  auto const dots = s.find("..");
  if (dots == std::string::npos) throw ConfigError("seed range '" + s + "' is not of the form a..b");
  std::uint64_t a, b;
  try {
    std::size_t used = 0;
    std::string const lo = s.substr(0, dots), hi = s.substr(dots + 2);
    a = std::stoull(lo, &used);
    if (used != lo.size() || lo.empty() || lo[0] == '-') throw std::invalid_argument(lo);
    b = std::stoull(hi, &used);
    if (used != hi.size() || hi.empty() || hi[0] == '-') throw std::invalid_argument(hi);
  } catch (std::exception const&) {
    throw ConfigError("seed range '" + s + "' is not of the form a..b");
  }
  if (b < a) throw ConfigError("seed range '" + s + "' is empty");
  if (b - a >= 10'000'000) throw ConfigError("seed range '" + s + "' is too long");
  std::vector<std::uint64_t> out;
  for (std::uint64_t x = a;; ++x) {
    out.push_back(x);
    if (x == b) break;
  }
  return out;
}

struct Grid {
  std::vector<double> eps;  // total epsilon, split evenly between eps1 and eps2
  std::vector<double> eps1;
  std::vector<double> eps2;
  std::vector<double> A;
  Mode target = Mode::simulate;
};

struct ExperimentConfig {
  Mode mode = Mode::simulate;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double A = 2.0;
  double delta = 0.01;
  std::optional<int> jbar0;  // resolved by resolve()
  std::optional<int> N;
  std::optional<int> j0;     // fixes j0 and skips the scan
  int L = 256;
  double dt = 0.0;           // <= 0: default step
  std::optional<double> T;   // absent: delta eps^-A / C_hat, capped at T_max
  double T_max = 1e4;
  double calibration_T = 1e3;
  int calibration_seeds = 4;
  int samples = 512;
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::vector<double>> potential;  // replaces sampling, same V for every seed
  std::optional<std::vector<std::complex<double>>> datum;  // sites -L..L
  std::size_t trials = 1000;
  std::size_t single_form_trials = 100000;
  double success_threshold = 0.8;
  bool sensitivity = true;
  int screen_degree = 2;
  int screen_diameter = 1;
  Grid grid;
  unsigned threads = 1;
  std::string out_dir = "out";

  double eps() const { return eps1 + eps2; }
  int barrier_width() const { return N.value(); }
  int reference_site() const { return jbar0.value(); }
  LatticeBox box() const { return LatticeBox(L); }
};

namespace detail {

inline double number(json const& j, char const* key) {
  if (!j.is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  double const x = j.get<double>();
  if (!std::isfinite(x)) throw ConfigError(std::string("'") + key + "' must be finite");
  return x;
}

inline int integer(json const& j, char const* key) {
  if (!j.is_number_integer()) throw ConfigError(std::string("'") + key + "' must be an integer");
  return j.get<int>();
}

inline std::vector<double> numbers(json const& j, char const* key) {
  if (!j.is_array()) throw ConfigError(std::string("'") + key + "' must be an array of numbers");
  std::vector<double> out;
  for (auto const& x : j) out.push_back(number(x, key));
  return out;
}

inline std::vector<std::uint64_t> seeds_from_json(json const& j) {
  if (j.is_string()) return parse_seed_range(j.get<std::string>());
  if (j.is_object()) {
    if (!j.contains("from") || !j.contains("to")) throw ConfigError("'seeds' object needs 'from' and 'to'");
    int const a = integer(j.at("from"), "seeds.from"), b = integer(j.at("to"), "seeds.to");
    if (a < 0) throw ConfigError("'seeds' must be non-negative");
    return parse_seed_range(std::to_string(a) + ".." + std::to_string(b));
  }
  if (j.is_array()) {
    std::vector<std::uint64_t> out;
    for (auto const& x : j) {
      if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<long long>() >= 0)) {
        throw ConfigError("'seeds' entries must be non-negative integers");
      }
      out.push_back(x.get<std::uint64_t>());
    }
    return out;
  }
  throw ConfigError("'seeds' must be an array, \"a..b\" or {from, to}");
}

/// Smallest j with sum_{|k| > j} |q_k|^2 < delta, or nullopt.
inline std::optional<int> tail_radius(std::vector<double> const& mass, int L, double delta) {
  double tail = 0.0;
  for (int j = L; j >= 0; --j) {
    if (!(tail < delta)) return j + 1 <= L ? std::optional<int>(j + 1) : std::nullopt;
    tail += mass[static_cast<std::size_t>(L + j)];
    if (j > 0) tail += mass[static_cast<std::size_t>(L - j)];
  }
  return 0;
}

}  // namespace detail

/// q_j proportional to sech(j/4), unit norm on the box.
inline State default_datum(LatticeBox box) {
  State q(box);
  double n = 0.0;
  for (int j = -box.half_width; j <= box.half_width; ++j) {
    q.at(j) = 1.0 / std::cosh(j / 4.0);
    n += std::norm(q(j));
  }
  for (auto& z : q.data()) z /= std::sqrt(n);
  return q;
}

inline State initial_datum(ExperimentConfig const& c) {
  if (!c.datum) return default_datum(c.box());
  State q(c.box());
  q.data() = *c.datum;
  return q;
}

/// Fills N and jbar0 and checks every cross-parameter constraint.
inline void resolve(ExperimentConfig& c) {
  if (!(c.eps1 >= 0.0) || !(c.eps2 >= 0.0)) throw ConfigError("eps1 and eps2 must be non-negative");
  if (!(c.eps() < 1.0)) throw ConfigError("eps1 + eps2 must be below 1");
  if (!(c.A > 1.0)) throw ConfigError("A must exceed 1");
  if (!(c.delta > 0.0)) throw ConfigError("delta must be positive");
  if (c.L < 1) throw ConfigError("L must be positive");
  if (c.seeds.empty()) throw ConfigError("no seeds");
  if (c.samples < 1) throw ConfigError("samples must be positive");
  if (c.T && !(*c.T >= 0.0)) throw ConfigError("T must be non-negative");
  if (!(c.T_max > 0.0) || !(c.calibration_T >= 0.0)) throw ConfigError("T_max and calibration_T must be positive");
  if (c.calibration_seeds < 1) throw ConfigError("calibration_seeds must be positive");
  if (!(c.success_threshold >= 0.0 && c.success_threshold <= 1.0)) throw ConfigError("success_threshold outside [0,1]");
  if (c.screen_degree < 2 || c.screen_diameter < 0) throw ConfigError("screen limits too small");

  if (c.potential && c.potential->size() != c.box().size()) {
    throw ConfigError("potential needs 2L+1 = " + std::to_string(c.box().size()) + " entries");
  }
  if (c.datum && c.datum->size() != c.box().size()) {
    throw ConfigError("datum needs 2L+1 = " + std::to_string(c.box().size()) + " entries");
  }

  if (!c.N) c.N = minimum_barrier_width(c.A);
  if (*c.N < minimum_barrier_width(c.A)) {
    throw ConfigError("N below the minimum barrier width " + std::to_string(minimum_barrier_width(c.A)));
  }
  int const N = *c.N;
  if (!c.jbar0) {
    // smallest jbar0 >= 2N with datum mass beyond jbar0 - N below delta
    State const q = initial_datum(c);
    std::vector<double> mass;
    for (auto const& z : q.data()) mass.push_back(std::norm(z));
    auto const r = detail::tail_radius(mass, c.L, c.delta);
    if (!r) throw ConfigError("initial datum has tail mass >= delta everywhere in the box");
    c.jbar0 = std::max(2 * N, *r + N);
  }
  if (*c.jbar0 < 2 * N) throw ConfigError("jbar0 must be at least 2N");
  int const far = c.j0 ? *c.j0 : 2 * *c.jbar0;
  if (c.j0 && *c.j0 - N < 1) throw ConfigError("j0 - N must be positive");
  if (far + N + 8 > c.L) throw ConfigError("box L = " + std::to_string(c.L) + " too small for j0 up to " +
                                           std::to_string(far) + " (needs L >= j0 + N + 8)");

  if (c.mode == Mode::measure && c.trials < 1000) throw ConfigError("measure needs trials >= 1000");
  if (c.mode == Mode::sweep) {
    if (c.grid.target == Mode::sweep || c.grid.target == Mode::measure) {
      throw ConfigError("sweep target must be simulate, verify or normal-form");
    }
    if (!c.grid.eps.empty() && (!c.grid.eps1.empty() || !c.grid.eps2.empty())) {
      throw ConfigError("grid: give either eps or eps1/eps2");
    }
  }
}

inline ExperimentConfig config_from_json(json const& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static std::set<std::string> const known{
      "mode", "eps1", "eps2", "A", "delta", "jbar0", "N", "j0", "L", "dt", "T", "T_max", "calibration_T",
      "calibration_seeds", "samples", "seeds", "potential", "datum", "trials", "single_form_trials",
      "success_threshold", "sensitivity", "screen", "grid", "threads", "out", "eps"};
  for (auto const& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");
  }

  ExperimentConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    if (j.contains("eps")) {
      if (j.contains("eps1") || j.contains("eps2")) throw ConfigError("give either eps or eps1/eps2");
      c.eps1 = c.eps2 = detail::number(j.at("eps"), "eps") / 2.0;
    }
    if (j.contains("eps1")) c.eps1 = detail::number(j.at("eps1"), "eps1");
    if (j.contains("eps2")) c.eps2 = detail::number(j.at("eps2"), "eps2");
    if (j.contains("A")) c.A = detail::number(j.at("A"), "A");
    if (j.contains("delta")) c.delta = detail::number(j.at("delta"), "delta");
    if (j.contains("jbar0")) c.jbar0 = detail::integer(j.at("jbar0"), "jbar0");
    if (j.contains("N")) c.N = detail::integer(j.at("N"), "N");
    if (j.contains("j0")) c.j0 = detail::integer(j.at("j0"), "j0");
    if (j.contains("L")) c.L = detail::integer(j.at("L"), "L");
    if (j.contains("dt")) c.dt = detail::number(j.at("dt"), "dt");
    if (j.contains("T")) c.T = detail::number(j.at("T"), "T");
    if (j.contains("T_max")) c.T_max = detail::number(j.at("T_max"), "T_max");
    if (j.contains("calibration_T")) c.calibration_T = detail::number(j.at("calibration_T"), "calibration_T");
    if (j.contains("calibration_seeds")) c.calibration_seeds = detail::integer(j.at("calibration_seeds"), "calibration_seeds");
    if (j.contains("samples")) c.samples = detail::integer(j.at("samples"), "samples");
    if (j.contains("seeds")) c.seeds = detail::seeds_from_json(j.at("seeds"));
    if (j.contains("potential")) c.potential = detail::numbers(j.at("potential"), "potential");
    if (j.contains("datum")) {
      std::vector<std::complex<double>> d;
      for (auto const& x : j.at("datum")) {
        if (x.is_array() && x.size() == 2) {
          d.emplace_back(detail::number(x[0], "datum"), detail::number(x[1], "datum"));
        } else {
          d.emplace_back(detail::number(x, "datum"), 0.0);
        }
      }
      c.datum = std::move(d);
    }
    if (j.contains("trials")) {
      int const t = detail::integer(j.at("trials"), "trials");
      if (t < 0) throw ConfigError("trials must be non-negative");
      c.trials = static_cast<std::size_t>(t);
    }
    if (j.contains("single_form_trials")) {
      int const t = detail::integer(j.at("single_form_trials"), "single_form_trials");
      if (t < 1) throw ConfigError("single_form_trials must be positive");
      c.single_form_trials = static_cast<std::size_t>(t);
    }
    if (j.contains("success_threshold")) c.success_threshold = detail::number(j.at("success_threshold"), "success_threshold");
    if (j.contains("sensitivity")) c.sensitivity = j.at("sensitivity").get<bool>();
    if (j.contains("screen")) {
      auto const& s = j.at("screen");
      if (s.contains("max_degree")) c.screen_degree = detail::integer(s.at("max_degree"), "screen.max_degree");
      if (s.contains("max_diameter")) c.screen_diameter = detail::integer(s.at("max_diameter"), "screen.max_diameter");
    }
    if (j.contains("grid")) {
      auto const& g = j.at("grid");
      if (!g.is_object()) throw ConfigError("'grid' must be an object");
      if (g.contains("eps")) c.grid.eps = detail::numbers(g.at("eps"), "grid.eps");
      if (g.contains("eps1")) c.grid.eps1 = detail::numbers(g.at("eps1"), "grid.eps1");
      if (g.contains("eps2")) c.grid.eps2 = detail::numbers(g.at("eps2"), "grid.eps2");
      if (g.contains("A")) c.grid.A = detail::numbers(g.at("A"), "grid.A");
      if (g.contains("target")) c.grid.target = parse_mode(g.at("target").get<std::string>());
    }
    if (j.contains("threads")) {
      int const t = detail::integer(j.at("threads"), "threads");
      if (t < 1) throw ConfigError("threads must be positive");
      c.threads = static_cast<unsigned>(t);
    }
    if (j.contains("out")) c.out_dir = j.at("out").get<std::string>();
  } catch (json::exception const& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  return c;
}

/// The resolved configuration as echoed into artifacts.  Threads and the
/// output directory are left out so that outputs do not depend on them.
inline json config_echo(ExperimentConfig const& c) {
  json j{{"mode", to_string(c.mode)},
         {"eps1", c.eps1},
         {"eps2", c.eps2},
         {"eps", c.eps()},
         {"A", c.A},
         {"delta", c.delta},
         {"L", c.L},
         {"dt", c.dt},
         {"T_max", c.T_max},
         {"calibration_T", c.calibration_T},
         {"calibration_seeds", c.calibration_seeds},
         {"samples", c.samples},
         {"seeds", c.seeds},
         {"trials", c.trials},
         {"single_form_trials", c.single_form_trials},
         {"success_threshold", c.success_threshold},
         {"sensitivity", c.sensitivity},
         {"screen", {{"max_degree", c.screen_degree}, {"max_diameter", c.screen_diameter}}}};
  j["N"] = c.N ? json(*c.N) : json(nullptr);
  j["jbar0"] = c.jbar0 ? json(*c.jbar0) : json(nullptr);
  j["j0"] = c.j0 ? json(*c.j0) : json(nullptr);
  j["T"] = c.T ? json(*c.T) : json(nullptr);
  j["potential"] = c.potential ? json(*c.potential) : json(nullptr);
  if (c.datum) {
    json d = json::array();
    for (auto const& z : *c.datum) d.push_back({z.real(), z.imag()});
    j["datum"] = d;
  } else {
    j["datum"] = "sech(j/4)";
  }
  if (c.mode == Mode::sweep) {
    j["grid"] = {{"eps", c.grid.eps}, {"eps1", c.grid.eps1}, {"eps2", c.grid.eps2}, {"A", c.grid.A},
                 {"target", to_string(c.grid.target)}};
  }
  return j;
}

}  // namespace dnls::harness
