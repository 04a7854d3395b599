#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "dlon/models.hpp"
#include "dlon/mpc.hpp"
#include "dlon/sim.hpp"

namespace dlon {

enum class ModelKind { Rigid, Composite };

struct ModelConfig {
  double gamma = 0.9;   // composite discount per control step
  int window = 30;      // N_e
  double ridge = 1e-6;  // mu
};

struct TmRecord {
  int terminal = -1;
  int steps_used = 0;
  bool goal_reached = false;
  double max_c = 0.0;    // max stacked margin over the TM
  double final_c = 0.0;  // stacked margin at TM end
};

struct InstallReport {
  std::vector<TmRecord> tms;
  bool success = false;
  double total_wall_time_s = 0.0;  // in-memory diagnostic, not persisted
};

struct InstallEvent {
  double t = 0.0;  // simulation time [s]
  int held = -1;
  Eigen::VectorXd y;
  Twist2 u;
  double c_max = 0.0;
  double alpha = 1.0;
};
using EventSink = std::function<void(const InstallEvent&)>;

/// Picks the free terminal closest to constraint violation: highest
/// nearest-obstacle margin among graspable candidates (margin < 0, inside W).
/// Ties break toward the lowest terminal id; none when no candidate remains.
std::optional<int> select_terminal(const Output& y, const Scenario& scenario);

struct InstallResult {
  InstallReport report;
  SimState final_state;
};

/// The full installation loop: select, grasp, adaptive receding-horizon
/// control until the goal tolerance, then mate (or release and retry, at most
/// twice per terminal). The blend weight resets to 1 and the local window
/// clears at every grasp.
InstallResult install_dlon(const SimState& init, const DlonTopology& topo,
                           const Scenario& scenario, const MpcConfig& mpc_cfg,
                           const ModelConfig& model_cfg, ModelKind kind,
                           const SimParams& params = {}, EventSink sink = {});

}  // namespace dlon
