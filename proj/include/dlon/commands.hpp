#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlon/planner.hpp"

namespace dlon {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  ExitOk = 0,
  ExitInstallFailed = 2,
  ExitInfeasibleScenario = 3,
  ExitIoError = 4,
};

struct CliOptions {
  std::string scenario_path;
  std::string scenario_dir;   // bench: directory holding the four problem files
  std::string out_dir = "out";
  std::string data_dir;       // dataset location for sysid / eval-models
  std::uint64_t seed = 0;
  int trajectories = -1;      // collect: override the configured count
  int seeds = 1;              // bench: seeds per (scenario, model) cell
  int jobs = 1;
  bool grid_search = false;   // sysid: small (lambda, T) grid instead of defaults
  double duration_s = 5.0;    // simulate
  std::string model = "composite";
  std::vector<std::string> overrides;
};

int cmd_simulate(const CliOptions& opts);
int cmd_collect(const CliOptions& opts);
int cmd_sysid(const CliOptions& opts);
int cmd_eval_models(const CliOptions& opts);
int cmd_install(const CliOptions& opts);
int cmd_bench(const CliOptions& opts);

/// Shared helper: run one installation for a loaded config and write the
/// per-run artifacts (report.json, events.csv, scene.svg, margins.svg).
struct InstallRunResult {
  InstallReport report;
  double run_max_c = 0.0;
  double run_final_c = 0.0;
};
InstallRunResult run_install(const std::string& scenario_path,
                             const std::vector<std::string>& overrides, ModelKind kind,
                             std::uint64_t seed, const std::string& out_dir /* empty: no files */);

}  // namespace dlon
