#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "dlon/models.hpp"
#include "dlon/se2.hpp"
#include "dlon/sim.hpp"

namespace dlon {

struct MpcConfig {
  int horizon = 20;               // N
  double dt = 1.0 / 30.0;         // control period (1/F_c)
  Eigen::Vector3d q{0.1, 0.1, 0.05};          // control cost diagonal
  Eigen::Vector3d q_delta{1.0, 1.0, 0.5};     // control increment cost diagonal
  double terminal_weight = 10.0;  // p
  double beta = 0.01;             // rotational weight of d_beta [m^2]
  Eigen::Vector3d u_max{0.05, 0.05, 0.3};     // admissible box U
  double goal_tol = 1e-4;         // eps_g on d_beta
  int max_tm_steps = 900;         // control-loop cap per terminal manipulation
  int scp_iterations = 3;
  double slack_weight = 1e4;
  double obstacle_screen = 0.25;  // only linearize margins near activity [m]
  double solver_eps = 1e-8;
  int solver_max_iters = 4000;
};

enum class SolveStatus { Optimal, MaxIterations, InfeasibleRelaxed };

struct MpcSolution {
  std::vector<Twist2> u_sequence;               // length N, entries inside U
  std::vector<Eigen::VectorXd> predicted_y;     // N+1 stacked outputs (frozen model)
  std::vector<Eigen::VectorXd> constraint_margins;  // c(y) per predicted step
  double cost = 0.0;                            // stage + terminal cost of the rollout
  double slack = 0.0;
  SolveStatus status = SolveStatus::Optimal;
  std::vector<double> scp_costs;                // QP objective per SCP iteration
  Eigen::VectorXd admm_x, admm_y;               // warm-start carriers
};

/// Receding-horizon solve around the frozen input matrix b_hat = B(y0):
/// sequential convexification with linearized obstacle margins, box bounds on
/// u and a shared exact-penalty slack on the state constraints.
MpcSolution solve_tm_mpc(const Output& y0, const Eigen::MatrixXd& b_hat, const Pose2& goal,
                         const Scenario& scenario, const MpcConfig& cfg,
                         const MpcSolution* warm_start = nullptr);

/// Convenience overload freezing the composite model at y0.
MpcSolution solve_tm_mpc(const Output& y0, const CompositeModel& model, const Pose2& goal,
                         const Scenario& scenario, const MpcConfig& cfg,
                         const MpcSolution* warm_start = nullptr);

/// Stage cost d_beta(rho_h, goal) + u'Qu + du'Q_delta du on the held terminal.
double stage_cost(const Output& y, const Twist2& u, const Twist2& u_prev, const Pose2& goal,
                  const MpcConfig& cfg);
double terminal_cost(const Output& y_n, const Pose2& goal, const MpcConfig& cfg);

/// SE(2) composition of a receptacle pose with its insertion offset.
Pose2 goal_from_receptacle(const Pose2& receptacle_pose, const Pose2& insertion_offset);

/// Strict d_beta comparison against the goal tolerance.
bool goal_reached(const Pose2& rho_h, const Pose2& rho_g, const MpcConfig& cfg);

}  // namespace dlon
