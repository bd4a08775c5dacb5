// dnls_cli: command-line front end for the experiment harness.
//
//   dnls_cli simulate|normal-form|measure|sweep|verify --config cfg.json --out dir
//            [--seed-range a..b] [--threads k]
//
// THREADS and OUT_DIR in the environment replace the config values;
// explicit flags win over both.  Exit codes: 0 pass, 1 certificate failure,
// 2 config error, 3 numerical abort.

#include "dnls/harness/run.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace h = dnls::harness;

namespace {

int fail_config(std::string const& msg) {
  std::cerr << "config error: " << msg << "\n";
  return static_cast<int>(h::ExitStatus::config_error);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disordered DNLS experiments"};
  app.require_subcommand(1, 1);

  std::string config_path, out_dir, seed_range;
  int threads = 0;
  for (char const* name : {"simulate", "normal-form", "measure", "sweep", "verify"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed-range", seed_range, "seeds a..b, inclusive");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    int const rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(h::ExitStatus::config_error);
  }

  h::ExperimentConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) return fail_config("cannot open " + config_path);
    h::json j;
    try {
      j = h::json::parse(in);
    } catch (h::json::parse_error const& e) {
      return fail_config(std::string("invalid JSON: ") + e.what());
    }
    cfg = h::config_from_json(j);
    cfg.mode = h::parse_mode(app.get_subcommands().front()->get_name());

    if (char const* env = std::getenv("THREADS")) {
      int const t = std::atoi(env);
      if (t < 1) return fail_config("THREADS must be a positive integer");
      cfg.threads = static_cast<unsigned>(t);
    }
    if (char const* env = std::getenv("OUT_DIR"); env && *env) cfg.out_dir = env;
    if (threads > 0) cfg.threads = static_cast<unsigned>(threads);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!seed_range.empty()) cfg.seeds = h::parse_seed_range(seed_range);
  } catch (h::ConfigError const& e) {
    return fail_config(e.what());
  }

  h::RunReport const report = h::run(cfg);
  if (report.status == h::ExitStatus::config_error) return fail_config(report.summary.value("error", "invalid config"));
  try {
    h::write_artifacts(report, cfg.out_dir);
  } catch (std::exception const& e) {
    std::cerr << "output error: " << e.what() << "\n";
    return static_cast<int>(h::ExitStatus::config_error);
  }
  std::cout << h::to_string(cfg.mode) << ": status " << static_cast<int>(report.status);
  for (auto const& [k, v] : report.metrics) std::cout << "  " << k << "=" << v;
  std::cout << "\n";
  return static_cast<int>(report.status);
}
