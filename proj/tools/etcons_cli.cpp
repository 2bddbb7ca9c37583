#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace etcons::cli;

  CLI::App app{"Event-triggered consensus over lossy, delayed networks: certify, simulate, verify, sweep"};
  app.require_subcommand(1);

  CommonOptions opt;
  std::uint64_t seed = 0;
  std::string trace_dir;
  std::string param;
  std::string values;
  unsigned jobs = 0;

  auto add_common = [&](CLI::App* sub, bool needs_scenario, bool needs_out) {
    auto* s = sub->add_option("--scenario", opt.scenario, "Scenario JSON file");
    if (needs_scenario) s->required()->check(CLI::ExistingFile);
    auto* o = sub->add_option("--out", opt.out, "Output directory (certify: output file)");
    if (needs_out) o->required();
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_flag("--strict", opt.strict, "Abort on the first runtime invariant breach");
  };

  auto* certify = app.add_subcommand("certify", "Evaluate all closed-form bounds");
  add_common(certify, true, false);
  auto* simulate = app.add_subcommand("simulate", "Run the simulation and write CSV traces");
  add_common(simulate, true, true);
  auto* verify = app.add_subcommand("verify", "Simulate (or reload a trace) and check it against the bounds");
  add_common(verify, true, true);
  verify->add_option("--trace", trace_dir, "Verify the CSV trace in this directory instead of re-running");
  auto* sweep = app.add_subcommand("sweep", "Run one scenario per parameter value");
  add_common(sweep, true, true);
  sweep->add_option("--param", param, "drop_prob|delay_max|beta|lambda|rho|seed")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--jobs", jobs, "Parallel workers (default: hardware threads)");
  auto* demo = app.add_subcommand("demo-paper", "Run the built-in six-agent example end to end");
  add_common(demo, false, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : usage_error;
  }

  for (auto* sub : {certify, simulate, verify, sweep, demo})
    if (sub->parsed() && sub->count("--seed")) opt.seed = seed;

  if (certify->parsed()) return cmd_certify(opt);
  if (simulate->parsed()) return cmd_simulate(opt);
  if (verify->parsed()) return cmd_verify(opt, trace_dir);
  if (sweep->parsed()) return cmd_sweep(opt, param, values, jobs);
  return cmd_demo(opt);
}
