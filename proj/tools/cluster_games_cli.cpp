// Experiment runner for the distributed multi-cluster equilibrium solver.
//
//   cluster_games run <config.json> [--outdir DIR] [--seed N] [--max-rounds N]
//   cluster_games ablate-gamma <config.json> [--outdir DIR] [--seed N]
//                 [--max-rounds N]
//
// Set CLUSTER_GAMES_LOG=1 for progress notes on stderr.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "cluster_games/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"distributed Nash-equilibrium seeking for multi-cluster games"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir;
  std::uint64_t seed = 0;
  int max_rounds = 0;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "experiment config file (JSON)")
        ->required();
    cmd->add_option("--outdir", outdir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "solver seed (overrides config)");
    cmd->add_option("--max-rounds", max_rounds,
                    "solver round cap (overrides config)");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "run one experiment");
  add_common(run_cmd);
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate-gamma", "run the experiment for gamma in {0.1, 0.5, 0.9, 1.0}");
  add_common(ablate_cmd);

  CLI11_PARSE(app, argc, argv);

  CLI::App* active = run_cmd->parsed() ? run_cmd : ablate_cmd;
  cluster_games::RunOverrides overrides;
  if (active->count("--outdir")) overrides.outdir = outdir;
  if (active->count("--seed")) overrides.seed = seed;
  if (active->count("--max-rounds")) overrides.max_rounds = max_rounds;

  try {
    if (run_cmd->parsed())
      return cluster_games::run_experiment(config_path, overrides);
    return cluster_games::run_gamma_ablation(config_path, overrides);
  } catch (const cluster_games::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
