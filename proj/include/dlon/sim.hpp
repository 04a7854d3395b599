#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dlon/se2.hpp"

namespace dlon {

struct JointParams {
  double rest_angle = 0.0;        // rad
  double stiffness = 0.05;        // N*m/rad
  double damping = 0.25;          // N*m*s/rad
  double angle_limit = 0.6;       // rad, displacement bound about rest_angle
  double friction_torque = 0.002; // N*m, Coulomb stick threshold
};

struct LinkDef {
  int parent = -1;           // -1 only for the root link
  double parent_offset = 0;  // hinge position along the parent link [m]
  double length = 0.025;     // m
  JointParams joint;         // unused for the root link
};

/// Tree of rigid links. Link frames sit at the proximal end with +x toward
/// the distal end; the joint of link i (i >= 1) has index i-1 and rotates
/// link i relative to its parent. Terminals are leaf links; the terminal
/// pose is the frame at the leaf's distal end.
struct DlonTopology {
  std::vector<LinkDef> links;       // links[0] is the root; parent index < own index
  std::vector<int> terminal_links;  // leaf link per terminal, >= 2 terminals
  std::vector<std::vector<int>> branch_joints;  // joint ids per branch (metadata)
  double link_drag = 0.4;           // N*s/m, planar drag applied at mid-link

  int link_count() const { return static_cast<int>(links.size()); }
  int joint_count() const { return link_count() - 1; }
  int terminal_count() const { return static_cast<int>(terminal_links.size()); }

  const std::vector<std::vector<int>>& children() const;
  void validate() const;
  std::uint64_t hash() const;

 private:
  mutable std::vector<std::vector<int>> children_;  // lazy adjacency cache
};

/// Star of chains joined at one junction point (the root link's proximal end).
struct BranchedSpec {
  double link_length = 0.025;
  std::vector<int> branch_links = {13, 13, 8};
  // Rest angle of each branch's first joint relative to the root link
  // (entry 0 is ignored; the root link has no joint).
  std::vector<double> branch_rest = {0.0, 2.4, -2.4};
  JointParams joint;
  double link_drag = 0.4;
};

DlonTopology make_branched_topology(const BranchedSpec& spec);

enum class TerminalStatus { Free, Held, Mated };

struct SimState {
  int root_link = 0;            // link whose world pose is stored
  Pose2 root_pose;              // world pose of root_link's frame
  Eigen::VectorXd joint_angles; // one entry per joint
  std::vector<TerminalStatus> terminal_status;
  std::vector<Pose2> mated_poses;  // valid where status == Mated

  std::optional<int> held_terminal() const;
};

/// Initial placement: junction pose plus a per-branch curl added to every
/// joint of that branch (a pre-stressed, visibly bent starting shape).
SimState make_initial_state(const DlonTopology& topo, const Pose2& root_pose,
                            const std::vector<double>& branch_curl);

struct Obstacle {
  Eigen::Vector2d center;
  double radius = 0.03;  // m
};

struct Receptacle {
  Pose2 pose;
  Pose2 insertion_offset;  // expressed in the receptacle frame
};

struct Scenario {
  double x_min = 0.0, y_min = 0.0, x_max = 1.2, y_max = 0.9;  // workspace W
  std::vector<Obstacle> obstacles;
  std::vector<Receptacle> receptacles;  // one per terminal
  double terminal_radius = 0.0318;      // r_t
  double clearance = 0.01;              // r_eps

  double safety_radius(const Obstacle& o) const {
    return o.radius + terminal_radius + clearance;
  }
  bool in_workspace(const Pose2& p) const {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  Pose2 goal(int terminal) const;  // receptacle pose composed with the offset
  void validate() const;
};

struct SimParams {
  double fs = 240.0;                 // simulation rate [Hz]
  double pin_stiffness_lin = 1000.0; // N/m, mated-terminal penalty spring
  double pin_stiffness_ang = 10.0;   // N*m/rad
  double pin_tolerance = 1e-3;       // m, allowed mated-pose drift
  double relax_rate_tol = 1e-4;      // rad/s, equilibrium criterion
  int relax_max_iters = 150000;
};

/// Stacked world-frame terminal poses with their manipulation status.
struct Output {
  std::vector<Pose2> poses;
  std::vector<TerminalStatus> status;

  int size() const { return static_cast<int>(poses.size()); }
  int held() const;  // -1 when no terminal is held
  Eigen::VectorXd vec() const;
};

/// Forward kinematics of every link frame for the current rooting.
std::vector<Pose2> link_poses(const SimState& state, const DlonTopology& topo);

Output observe(const SimState& state, const DlonTopology& topo);

/// One quasi-static step at dt = 1/fs. Requires exactly one held terminal;
/// the held terminal tracks u kinematically, internal joints follow
/// overdamped stick-slip dynamics under elastic, mated-pin and drag torques.
SimState step(const SimState& state, const DlonTopology& topo, const Twist2& u,
              double dt, const SimParams& params = {});

/// Free evolution (u = 0 virtual hold on the current root) for a duration.
SimState settle(const SimState& state, const DlonTopology& topo, double duration_s,
                const SimParams& params = {});

/// Status transitions. grasp re-roots the tree at the grasped terminal and
/// checks workspace membership plus obstacle clearance; mate requires the
/// held terminal within eps_g of the goal (d_beta) and pins it there.
SimState grasp(const SimState& state, const DlonTopology& topo, int terminal,
               const Scenario& scenario);
SimState hold_terminal(const SimState& state, const DlonTopology& topo, int terminal);
SimState release(const SimState& state);
SimState mate(const SimState& state, const DlonTopology& topo, int terminal,
              const Pose2& goal, double beta, double eps_g);

/// Frictionless overdamped relaxation with every terminal soft-pinned at the
/// given pose (the first clamp is enforced exactly by re-rooting there).
/// Returns the equilibrium state; throws NoConvergence for infeasible clamps.
SimState relax_to_equilibrium(const SimState& state, const DlonTopology& topo,
                              const std::vector<Pose2>& clamped_terminal_poses,
                              const SimParams& params = {});

/// Stacked margins c(y): r_{t,o} - |p_t - p_o| for every (terminal, obstacle)
/// pair, then one signed workspace-exit distance per terminal. Positive
/// entries are violations.
Eigen::VectorXd check_constraints(const Output& y, const Scenario& scenario);

}  // namespace dlon
