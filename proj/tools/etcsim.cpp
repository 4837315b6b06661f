// etcsim: event-triggered control of delay systems from the command line.
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "etcsim/harness/commands.hpp"

namespace h = etcsim::harness;

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered control simulator and dwell-time certifier for delay systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 1;
  std::string fault;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config file")->required();
    sub->add_option("--out", out, "output directory (ETCSIM_OUT overrides)");
    sub->add_option("--workers", workers, "parallel sweep workers")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "seed for randomized audits");
  };
  auto* simulate = app.add_subcommand("simulate", "run one closed-loop simulation");
  auto* table = app.add_subcommand("table", "event counts over a parameter sweep");
  auto* zeno = app.add_subcommand("zeno-bound", "minimum inter-event time certificate");
  auto* verify = app.add_subcommand("verify", "simulate and audit Lyapunov bounds");
  for (auto* sub : {simulate, table, zeno, verify}) add_common(sub);
  verify->add_option("--fault", fault, "test-only fault injection")->check(CLI::IsMember({"skip-reset"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : h::exit_code::error;
  }

  try {
    const h::ExperimentConfig cfg = h::load_config(config_path);
    h::RunOptions opt;
    opt.out_dir = h::resolve_out_dir(out, cfg);
    opt.workers = workers;
    opt.seed = seed;
    opt.fault_skip_reset = fault == "skip-reset";

    if (*simulate) return h::cmd_simulate(cfg, opt, std::cout);
    if (*table) return h::cmd_table(cfg, opt, std::cout);
    if (*zeno) return h::cmd_zeno_bound(cfg, opt, std::cout);
    return h::cmd_verify(cfg, opt, std::cout);
  } catch (const h::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return h::exit_code::error;
}
