#include <iostream>

#include <CLI11.hpp>

#include "tdlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tdlab: fixed points and convergence of TD-style iterations"};
  app.require_subcommand(1);

  tdlab::CliOptions opts;
  std::string out_dir;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opts.config_path, "experiment JSON file")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_option("--workers", workers, "sweep worker threads (overrides workers)")
        ->check(CLI::PositiveNumber);
    return sub;
  };
  CLI::App* run = add("run", "run one solver and write the trajectory");
  CLI::App* sweep = add("sweep", "evaluate a parameter grid");
  CLI::App* check = add("check", "report force constants and contraction factors");
  CLI::App* safedist = add("safedist", "search for an update distribution with rho < 1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? tdlab::kExitOk : tdlab::kExitConfig;
  }

  if (!out_dir.empty()) opts.out_dir = out_dir;
  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed")) opts.seed = seed;
  if (chosen->count("--workers")) opts.workers = workers;

  if (chosen == run) return tdlab::cmd_run(opts, std::cout, std::cerr);
  if (chosen == sweep) return tdlab::cmd_sweep(opts, std::cout, std::cerr);
  if (chosen == check) return tdlab::cmd_check(opts, std::cout, std::cerr);
  if (chosen == safedist) return tdlab::cmd_safedist(opts, std::cout, std::cerr);
  return tdlab::kExitFailure;
}
