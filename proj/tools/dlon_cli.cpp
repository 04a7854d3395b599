#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "dlon/commands.hpp"
#include "dlon/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Planar DLO-network manipulation toolkit"};
  app.require_subcommand(1);

  dlon::CliOptions opts;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", opts.scenario_path, "problem config file")->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--override", opts.overrides, "config override section.key=value");
    cmd->add_option("--jobs", opts.jobs, "worker threads");
  };

  auto* sim = app.add_subcommand("simulate", "run one excitation trajectory");
  add_common(sim, true);
  sim->add_option("--duration", opts.duration_s, "seconds to simulate");

  auto* collect = app.add_subcommand("collect", "generate the excitation dataset");
  add_common(collect, true);
  collect->add_option("--trajectories", opts.trajectories, "trajectory count");

  auto* sysid = app.add_subcommand("sysid", "fit the sparse output-dynamics model");
  add_common(sysid, true);
  sysid->add_option("--data", opts.data_dir, "dataset directory")->required();
  sysid->add_flag("--grid", opts.grid_search, "small (lambda, T) grid search");

  auto* evalm = app.add_subcommand("eval-models", "trajectory-prediction error table");
  add_common(evalm, true);
  evalm->add_option("--data", opts.data_dir, "dataset directory")->required();

  auto* install = app.add_subcommand("install", "run the installation loop");
  add_common(install, true);
  install->add_option("--model", opts.model, "rigid | composite")
      ->check(CLI::IsMember({"rigid", "composite"}));

  auto* bench = app.add_subcommand("bench", "all problems x both models x seeds");
  add_common(bench, false);
  bench->add_option("--scenario-dir", opts.scenario_dir, "directory with the problem files")
      ->required();
  bench->add_option("--seeds", opts.seeds, "seeds per cell");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return dlon::cmd_simulate(opts);
    if (collect->parsed()) return dlon::cmd_collect(opts);
    if (sysid->parsed()) return dlon::cmd_sysid(opts);
    if (evalm->parsed()) return dlon::cmd_eval_models(opts);
    if (install->parsed()) return dlon::cmd_install(opts);
    if (bench->parsed()) return dlon::cmd_bench(opts);
  } catch (const dlon::MissingDataset& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return dlon::ExitIoError;
  } catch (const dlon::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return dlon::ExitIoError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return dlon::ExitInstallFailed;
  }
  return 0;
}
