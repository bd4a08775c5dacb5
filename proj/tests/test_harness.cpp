#include "dnls/harness/run.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace dnls;
using namespace dnls::harness;

namespace {

ExperimentConfig feasible(Mode m) {
  ExperimentConfig c;
  c.mode = m;
  c.eps1 = c.eps2 = 5e-5;
  c.A = 2.0;
  c.jbar0 = 64;
  c.L = 256;
  c.samples = 16;
  c.sensitivity = false;
  return c;
}

std::map<std::string, std::string> by_name(RunReport const& r) {
  std::map<std::string, std::string> m;
  for (auto const& a : r.artifacts) m[a.name] = a.content;
  return m;
}

json summary_of(RunReport const& r, std::string const& name) { return json::parse(by_name(r).at(name)); }

}  // namespace

// ---- configuration ---------------------------------------------------------

TEST(Config, SeedRange) {
  EXPECT_EQ(parse_seed_range("3..5"), (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(parse_seed_range("7..7"), (std::vector<std::uint64_t>{7}));
  for (char const* bad : {"5..3", "a..b", "3-5", "..4", "-1..2", "1..2x"}) {
    EXPECT_THROW(parse_seed_range(bad), ConfigError) << bad;
  }
}

TEST(Config, SeedForms) {
  EXPECT_EQ(config_from_json(json::parse(R"({"seeds":[4,2]})")).seeds, (std::vector<std::uint64_t>{4, 2}));
  EXPECT_EQ(config_from_json(json::parse(R"({"seeds":"0..2"})")).seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(config_from_json(json::parse(R"({"seeds":{"from":1,"to":2}})")).seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_THROW(config_from_json(json::parse(R"({"seeds":[-1]})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"seeds":1.5})")), ConfigError);
}

TEST(Config, RejectsUnknownAndMalformed) {
  EXPECT_THROW(config_from_json(json::parse(R"({"epsilon":0.1})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"eps1":"big"})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"([1,2])")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"eps":0.1,"eps1":0.05})")), ConfigError);
  EXPECT_THROW(config_from_json(json::parse(R"({"mode":"plot"})")), ConfigError);
}

TEST(Config, EpsIsTheSum) {
  auto c = config_from_json(json::parse(R"({"eps1":0.03,"eps2":0.01})"));
  resolve(c);
  EXPECT_DOUBLE_EQ(config_echo(c)["eps"].get<double>(), 0.04);
  auto d = config_from_json(json::parse(R"({"eps":0.04})"));
  EXPECT_DOUBLE_EQ(d.eps1, 0.02);
  EXPECT_DOUBLE_EQ(d.eps2, 0.02);
}

TEST(Config, ResolvesBarrierWidthAndReferenceSite) {
  ExperimentConfig c;
  c.A = 2.0;
  c.delta = 0.01;
  resolve(c);
  EXPECT_EQ(*c.N, 32);  // 8 A^2
  // brute force: smallest jbar0 >= 2N with sech^2 mass beyond jbar0 - N below delta
  double Z = 0.0;
  for (int j = -c.L; j <= c.L; ++j) Z += std::pow(1.0 / std::cosh(j / 4.0), 2);
  int want = -1;
  for (int jb = 2 * 32; jb < c.L; ++jb) {
    double tail = 0.0;
    for (int j = -c.L; j <= c.L; ++j) {
      if (std::abs(j) > jb - 32) tail += std::pow(1.0 / std::cosh(j / 4.0), 2) / Z;
    }
    if (tail < c.delta) {
      want = jb;
      break;
    }
  }
  EXPECT_EQ(*c.jbar0, want);

  ExperimentConfig big;
  big.A = 3.0;
  big.L = 400;
  resolve(big);
  EXPECT_EQ(*big.N, 72);
}

TEST(Config, ResolveRejections) {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(resolve(c), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.A = 1.0; });
  bad([](ExperimentConfig& c) { c.eps1 = -0.1; });
  bad([](ExperimentConfig& c) { c.eps1 = 0.6, c.eps2 = 0.5; });
  bad([](ExperimentConfig& c) { c.delta = 0.0; });
  bad([](ExperimentConfig& c) { c.N = 10; });
  bad([](ExperimentConfig& c) { c.jbar0 = 40; });
  bad([](ExperimentConfig& c) { c.L = 100; });
  bad([](ExperimentConfig& c) { c.seeds.clear(); });
  bad([](ExperimentConfig& c) { c.potential = std::vector<double>(3, 0.0); });
  bad([](ExperimentConfig& c) {
    c.mode = Mode::measure;
    c.trials = 0;
  });
}

TEST(Config, EchoIsCompleteAndIgnoresThreads) {
  auto a = feasible(Mode::simulate);
  auto b = a;
  b.threads = 7;
  b.out_dir = "elsewhere";
  resolve(a);
  resolve(b);
  EXPECT_EQ(config_echo(a), config_echo(b));
  json const e = config_echo(a);
  for (char const* k : {"mode", "eps1", "eps2", "eps", "A", "delta", "jbar0", "N", "L", "dt", "T", "seeds"}) {
    EXPECT_TRUE(e.contains(k)) << k;
  }
}

// ---- measure ---------------------------------------------------------------

TEST(Measure, ZeroTrialsIsConfigError) {
  auto c = feasible(Mode::measure);
  c.trials = 0;
  EXPECT_EQ(run(c).status, ExitStatus::config_error);
}

TEST(Measure, DeterministicAcrossRunsAndThreads) {
  auto c = feasible(Mode::measure);
  c.trials = 1000;
  c.single_form_trials = 2000;
  c.seeds = {100};
  auto const a = run(c);
  c.threads = 3;
  auto const b = run(c);
  ASSERT_EQ(a.status, b.status);
  EXPECT_EQ(by_name(a), by_name(b));
}

TEST(Measure, RowsMatchDirectCheck) {
  auto c = feasible(Mode::measure);
  c.trials = 1000;
  c.single_form_trials = 1000;
  c.seeds = {5};
  auto const r = run(c);
  std::istringstream csv(by_name(r).at("measure_trials.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("# config: ", 0), 0u);
  std::getline(csv, line);
  EXPECT_EQ(line, "seed,j0_found,pass,min_abs_omega,first_violation_step");

  auto rc = c;
  resolve(rc);
  auto const sched = build_schedule(rc.eps(), rc.A, *rc.jbar0, *rc.N, ScheduleConstants::desk());
  auto const set = enumerate_constraint_indices(sched, ConstraintLimits::hopping());
  std::size_t rows = 0, passes = 0;
  while (std::getline(csv, line)) {
    std::uint64_t const seed = std::stoull(line.substr(0, line.find(',')));
    EXPECT_EQ(seed, 5 + rows);
    auto const v = acceptable_set_check(sample_potential(seed, LatticeBox(256)), sched, set);
    std::size_t const p1 = line.find(','), p2 = line.find(',', p1 + 1), p3 = line.find(',', p2 + 1);
    EXPECT_EQ(line.substr(p2 + 1, p3 - p2 - 1), v.passed() ? "1" : "0");
    passes += v.passed();
    ++rows;
  }
  EXPECT_EQ(rows, 1000u);
  json const s = summary_of(r, "measure_summary.json");
  EXPECT_EQ(s["acceptance"]["accepted"].get<std::size_t>(), passes);
  EXPECT_TRUE(s["acceptance"]["union_bound_holds"].get<bool>());
}

// ---- normal form / verify --------------------------------------------------

TEST(Verify, VacuousWithoutCoupling) {
  auto c = feasible(Mode::verify);
  c.eps1 = c.eps2 = 0.0;
  c.seeds = {0, 1, 2};
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::pass);
  json const s = summary_of(r, "verify_seed1.json");
  EXPECT_EQ(s["normal_form"]["s_star"], 1);
  EXPECT_TRUE(s["normal_form"]["violations"].empty());
}

TEST(Verify, AcceptedSeedPassesAllCertificates) {
  auto c = feasible(Mode::verify);
  c.seeds = {0};
  c.j0 = 64;
  c.sensitivity = true;
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::pass);
  json const s = summary_of(r, "verify_seed0.json");
  EXPECT_EQ(s["outcome"], "certified");
  EXPECT_TRUE(s["sensitivity"]["norm_ok"].get<bool>());
  EXPECT_TRUE(s["sensitivity"]["det_ok"].get<bool>());
  EXPECT_TRUE(s["normal_form"]["certified"].get<bool>());
}

TEST(Verify, EngineeredResonanceIsSurfaced) {
  auto c = feasible(Mode::normal_form);
  c.seeds = {0};
  c.j0 = 64;
  auto V = sample_potential(0, LatticeBox(256));
  V.set_potential(70, V.potential(71));
  c.potential = V.v;
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::certificate_failure);
  json const s = summary_of(r, "normal_form_seed0.json");
  ASSERT_EQ(s["outcome"], "resonance");
  auto const sites = s["violation"]["index"]["sites"].get<std::vector<int>>();
  EXPECT_EQ(sites, (std::vector<int>{70, 71}));
}

TEST(NormalFormMode, ReportSchemaAndPolynomial) {
  auto c = feasible(Mode::normal_form);
  c.seeds = {0};
  c.j0 = 64;
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::pass);
  json const s = summary_of(r, "normal_form_seed0.json")["normal_form"];
  for (char const* k : {"schedule", "barrier", "W", "remainder_norm", "violations"}) EXPECT_TRUE(s.contains(k)) << k;
  for (char const* k : {"a", "b", "eps_A", "max_band_coeff"}) EXPECT_TRUE(s["barrier"].contains(k)) << k;
  Hamiltonian const H = hamiltonian_from_json(summary_of(r, "normal_form_seed0_hamiltonian.json"));
  EXPECT_GT(H.term_count(), 0u);
}

// ---- simulate --------------------------------------------------------------

TEST(Simulate, UnitDeltaIsTrivialSuccess) {
  auto c = feasible(Mode::simulate);
  c.delta = 1.0;
  c.j0 = 64;
  c.T = 20.0;
  c.seeds = {0, 1, 2};
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::pass);
  EXPECT_EQ(r.metrics.at("success_fraction"), 1.0);
}

TEST(Simulate, LinearEnsembleDoesAtLeastAsWell) {
  auto c = feasible(Mode::simulate);
  c.eps1 = 0.05;
  c.eps2 = 0.3;
  c.delta = 1e-4;
  c.j0 = 64;
  c.T = 200.0;
  c.seeds = {0, 1, 2, 3};
  auto lin = c;
  lin.eps2 = 0.0;
  auto const a = run(c), b = run(lin);
  EXPECT_GE(b.metrics.at("success_fraction"), a.metrics.at("success_fraction"));
}

TEST(Simulate, CalibratedHorizonAndArtifacts) {
  auto c = feasible(Mode::simulate);
  c.j0 = 64;
  c.seeds = {0, 1};
  c.T_max = 50.0;
  c.calibration_T = 10.0;
  c.calibration_seeds = 1;
  auto const r = run(c);
  json const s = summary_of(r, "simulate_summary.json");
  double const C_hat = s["calibration"]["C_hat"];
  EXPECT_GT(C_hat, 0.0);
  double const T_theorem = c.delta / (std::pow(c.eps1 + c.eps2, c.A) * C_hat);
  EXPECT_NEAR(s["calibration"]["T_theorem"].get<double>(), T_theorem, 1e-9 * T_theorem);
  EXPECT_EQ(s["T"].get<double>(), std::min(T_theorem, 50.0));
  auto const files = by_name(r);
  std::istringstream csv(files.at("simulate_seed1.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("# config: ", 0), 0u);
  std::getline(csv, line);
  EXPECT_EQ(line, "t,norm,energy,M_j0,M_j0_plus_N,edge_mass");
  std::istringstream bin(files.at("simulate_seed1_final.bin"));
  auto [q, t] = read_snapshot(bin);
  EXPECT_EQ(t, s["T"].get<double>());
  EXPECT_NEAR(q.norm_squared(), 1.0, 1e-10);
}

TEST(Simulate, EpsilonHalvingLeakRatio) {
  auto c = feasible(Mode::simulate);
  c.j0 = 64;
  c.T = 100.0;
  c.seeds = {0, 1, 11};
  auto half = c;
  half.eps1 /= 2;
  half.eps2 /= 2;
  double const ratio = run(c).metrics.at("mean_leak_rate") / run(half).metrics.at("mean_leak_rate");
  // 2^A within a factor of 4
  EXPECT_GT(ratio, std::pow(2.0, c.A) / 4);
  EXPECT_LT(ratio, std::pow(2.0, c.A) * 4);
}

TEST(Simulate, EdgeMassIsNumericalAbort) {
  auto c = feasible(Mode::simulate);
  c.j0 = 64;
  c.T = 10.0;
  c.seeds = {0, 1};
  State q = default_datum(c.box());
  q.at(-c.L) = 1e-3;
  c.datum = q.data();
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::numerical_abort);
  EXPECT_EQ(by_name(r).count("simulate_seed0_abort.bin"), 1u);
}

TEST(Simulate, Deterministic) {
  auto c = feasible(Mode::simulate);
  c.j0 = 64;
  c.T = 30.0;
  c.seeds = {3, 4};
  auto const a = run(c);
  c.threads = 2;
  EXPECT_EQ(by_name(a), by_name(run(c)));
}

// ---- sweep -----------------------------------------------------------------

TEST(Sweep, SinglePointMatchesDirectRun) {
  auto c = feasible(Mode::sweep);
  c.grid.eps = {1e-4};
  c.grid.target = Mode::normal_form;
  c.seeds = {0, 1};
  c.j0 = 64;
  auto const s = run(c);
  auto d = c;
  d.mode = Mode::normal_form;
  d.grid = {};
  auto const direct = run(d);
  auto const files = by_name(s);
  std::string const prefix = "point_eps1=5.0000000000000002e-05_eps2=5.0000000000000002e-05_A=2/";
  for (auto const& [name, content] : by_name(direct)) {
    ASSERT_TRUE(files.count(prefix + name)) << name;
    EXPECT_EQ(files.at(prefix + name), content) << name;
  }
}

TEST(Sweep, GridOrderIsIrrelevant) {
  auto c = feasible(Mode::sweep);
  c.grid.target = Mode::normal_form;
  c.grid.eps1 = {5e-5, 1e-4};
  c.grid.eps2 = {0.0, 5e-5};
  c.seeds = {0};
  c.j0 = 64;
  auto d = c;
  d.grid.eps1 = {1e-4, 5e-5};
  d.grid.eps2 = {5e-5, 0.0};
  auto const a = run(c), b = run(d);
  EXPECT_EQ(summary_of(a, "sweep_summary.json")["points"].size(), 4u);
  // the echoed grid lists differ, everything else is identical
  auto fa = by_name(a), fb = by_name(b);
  fa.erase("sweep_summary.json");
  fb.erase("sweep_summary.json");
  for (auto* f : {&fa, &fb}) {
    auto& csv = f->at("sweep_long.csv");
    csv = csv.substr(csv.find('\n') + 1);
  }
  EXPECT_EQ(fa, fb);
}

TEST(Sweep, FailingPointIsIsolated) {
  auto c = feasible(Mode::sweep);
  c.grid.target = Mode::normal_form;
  c.grid.eps = {1e-4};
  c.grid.A = {2.0, 1.0};  // A = 1 is invalid
  c.seeds = {0};
  c.j0 = 64;
  auto const r = run(c);
  EXPECT_EQ(r.status, ExitStatus::config_error);
  json const s = summary_of(r, "sweep_summary.json");
  ASSERT_EQ(s["points"].size(), 2u);
  EXPECT_EQ(s["points"][0]["status"], 2);  // sorted: A = 1 first
  EXPECT_EQ(s["points"][1]["status"], 0);

  auto d = feasible(Mode::normal_form);
  d.eps1 = d.eps2 = 5e-5;
  d.seeds = {0};
  d.j0 = 64;
  auto const direct = by_name(run(d));
  auto const files = by_name(r);
  std::string const prefix = "point_eps1=5.0000000000000002e-05_eps2=5.0000000000000002e-05_A=2/";
  EXPECT_EQ(files.at(prefix + "normal_form_seed0.json"), direct.at("normal_form_seed0.json"));
}

TEST(Sweep, LongFormatRows) {
  auto c = feasible(Mode::sweep);
  c.grid.target = Mode::normal_form;
  c.grid.eps = {1e-4, 2e-4};
  c.grid.A = {2.0};
  c.seeds = {0};
  c.j0 = 64;
  auto const r = run(c);
  std::istringstream csv(by_name(r).at("sweep_long.csv"));
  std::string line;
  std::getline(csv, line);
  std::getline(csv, line);
  EXPECT_EQ(line, "eps1,eps2,A,metric,value");
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, 2u * 5u);  // 5 metrics per normal-form point
}

TEST(Sweep, LogLogSlope) {
  std::vector<std::pair<double, double>> xy;
  for (double x : {0.02, 0.04, 0.08, 0.16}) xy.emplace_back(x, 3.0 * x * x);
  EXPECT_NEAR(*log_log_slope(xy), 2.0, 1e-12);
  EXPECT_FALSE(log_log_slope({{0.1, 1.0}}).has_value());
  EXPECT_FALSE(log_log_slope({{0.1, 0.0}, {0.2, 0.0}}).has_value());
}

// ---- CLI -------------------------------------------------------------------

#ifdef DNLS_CLI
namespace {

std::filesystem::path scratch(std::string const& name) {
  auto p = std::filesystem::temp_directory_path() / ("dnls_cli_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

int cli(std::string const& args, std::string const& env = "") {
  std::string const cmd = env + " " DNLS_CLI " " + args + " > /dev/null 2>&1";
  int const rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(std::filesystem::path const& p, std::string const& s) { std::ofstream(p) << s; }

}  // namespace

TEST(Cli, ExitCodes) {
  auto const dir = scratch("codes");
  write_file(dir / "ok.json", R"({"eps":1e-4,"jbar0":64,"j0":64,"seeds":[0]})");
  write_file(dir / "bad.json", R"({"eps":1e-4,)");
  write_file(dir / "trials.json", R"({"trials":0})");
  EXPECT_EQ(cli("normal-form --config " + (dir / "ok.json").string() + " --out " + (dir / "o").string()), 0);
  EXPECT_EQ(cli("normal-form --config " + (dir / "ok.json").string() + " --out " + (dir / "o") .string() + " --seed-range 0..3"), 1);
  EXPECT_EQ(cli("normal-form --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(cli("measure --config " + (dir / "trials.json").string() + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(cli("measure --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(cli("plot --config " + (dir / "ok.json").string()), 2);
  EXPECT_EQ(cli("verify --config " + (dir / "ok.json").string() + " --seed-range 9..1"), 2);
  EXPECT_EQ(cli("verify --config " + (dir / "ok.json").string(), "THREADS=zero"), 2);

  State q = default_datum(LatticeBox(256));
  q.at(256) = 1e-3;
  json d = json::array();
  for (auto const& z : q.data()) d.push_back(z.real());
  write_file(dir / "edge.json", json{{"eps", 1e-4}, {"jbar0", 64}, {"j0", 64}, {"T", 5.0}, {"datum", d}}.dump());
  EXPECT_EQ(cli("simulate --config " + (dir / "edge.json").string() + " --out " + (dir / "o").string()), 3);
}

TEST(Cli, OutDirFromEnvironment) {
  auto const dir = scratch("env");
  write_file(dir / "ok.json", R"({"eps":1e-4,"jbar0":64,"j0":64,"seeds":[0],"out":"ignored"})");
  EXPECT_EQ(cli("normal-form --config " + (dir / "ok.json").string(), "OUT_DIR=" + (dir / "env_out").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(dir / "env_out" / "normal_form_summary.json"));
  // an explicit flag beats the environment
  EXPECT_EQ(cli("normal-form --config " + (dir / "ok.json").string() + " --out " + (dir / "flag_out").string(),
                "OUT_DIR=" + (dir / "env_out2").string()),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir / "flag_out" / "normal_form_summary.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "env_out2"));
}

TEST(Cli, ByteIdenticalReruns) {
  auto const dir = scratch("rerun");
  write_file(dir / "m.json", R"({"eps":0.05,"jbar0":64,"trials":1000,"single_form_trials":1000,"seeds":[7]})");
  ASSERT_EQ(cli("measure --config " + (dir / "m.json").string() + " --out " + (dir / "a").string()), 0);
  ASSERT_EQ(cli("measure --config " + (dir / "m.json").string() + " --out " + (dir / "b").string() + " --threads 2"), 0);
  for (char const* f : {"measure_trials.csv", "measure_summary.json"}) {
    std::ifstream a(dir / "a" / f), b(dir / "b" / f);
    std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
    EXPECT_FALSE(sa.empty());
    EXPECT_EQ(sa, sb) << f;
  }
}
#endif
