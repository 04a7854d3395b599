#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlon/se2.hpp"
#include "dlon/sim.hpp"

namespace dlon {

/// Symmetric box bounds on the admissible control space.
struct UBounds {
  Eigen::Vector3d max{0.05, 0.05, 0.3};  // |vx|, |vy| [m/s], |omega| [rad/s]
};

struct TrajectorySample {
  double t = 0.0;           // seconds since retention start
  Twist2 u;                 // constant excitation input
  std::vector<Pose2> y;     // terminal poses, y == observe(x)
  std::vector<Twist2> y_dot;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  // State snapshots matching samples; populated during generation, not persisted.
  std::vector<SimState> states;

  Eigen::VectorXd y_vec(int k) const;
  Eigen::VectorXd y_dot_vec(int k) const;
  int size() const { return static_cast<int>(samples.size()); }
};

struct DatasetMeta {
  double fs = 240.0;
  double fc = 30.0;
  std::uint64_t seed = 0;
  std::uint64_t topology_hash = 0;
  int n_terminals = 0;
  int held_terminal = 0;
  int samples_per_trajectory = 0;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;
};

/// Equality on the persisted content (meta and samples; state snapshots are
/// generation-time only).
bool operator==(const Dataset& a, const Dataset& b);

/// Constructs a dataset and enforces uniform trajectory length.
Dataset make_dataset(const DatasetMeta& meta, std::vector<Trajectory> trajectories);

struct RawTrajectory {
  double fs = 240.0;
  Twist2 u;
  std::vector<SimState> states;  // one snapshot per retained simulation step
};

/// Holds terminal 0, applies one constant input drawn uniformly from the
/// admissible box and records the state at every simulation step, trimming
/// the first burn_in_s seconds.
RawTrajectory excite(const SimState& init, const DlonTopology& topo, const UBounds& u_bounds,
                     double duration_s, double burn_in_s, std::uint64_t seed,
                     const SimParams& params = {});

/// Central differences on interior points, second-order one-sided at the
/// ends. Channels flagged angular are differenced through wrapped increments.
std::vector<Eigen::VectorXd> differentiate(const std::vector<Eigen::VectorXd>& series,
                                           double rate, const std::vector<bool>& angular = {});

/// Anti-alias moving average (window fs/fc, applied to the state channels so
/// outputs stay consistent with forward kinematics), then decimation to fc.
Trajectory downsample(const RawTrajectory& raw, const DlonTopology& topo, double fc);

struct DatasetConfig {
  int trajectories = 100;
  double duration_s = 15.0;
  double burn_in_s = 2.0;
  double fc = 30.0;
  std::uint64_t seed = 12345;
};

/// End-to-end generation: excite/downsample/differentiate per trajectory,
/// parallel across seeds.
Dataset collect_dataset(const SimState& init, const DlonTopology& topo, const UBounds& u_bounds,
                        const DatasetConfig& cfg, const SimParams& params = {}, int jobs = 1);

/// Directory layout: meta.json plus one CSV per trajectory (documented column
/// order: t, u, then pose and twist per terminal).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir,
                     std::optional<std::uint64_t> expected_topology_hash = {});

}  // namespace dlon
