#include <cmath>

#include "doctest.h"
#include "dlon/errors.hpp"
#include "dlon/models.hpp"
#include "dlon/mpc.hpp"

using namespace dlon;

namespace {

Output two_terminal_output(const Pose2& held, const Pose2& free_pose) {
  Output y;
  y.poses = {held, free_pose};
  y.status = {TerminalStatus::Held, TerminalStatus::Free};
  return y;
}

Scenario open_scenario() {
  Scenario sc;
  sc.x_min = -5;
  sc.y_min = -5;
  sc.x_max = 5;
  sc.y_max = 5;
  return sc;
}

Eigen::MatrixXd rigid_at(const Output& y) { return rigid_body_matrix(y.vec(), y.held()); }

}  // namespace

TEST_CASE("mpc: at-goal problem returns (near) zero inputs") {
  const Pose2 goal(0.3, 0.2, 0.5);
  const Output y0 = two_terminal_output(goal, Pose2(0.1, 0.1, 0.0));
  MpcConfig cfg;
  const auto sol = solve_tm_mpc(y0, rigid_at(y0), goal, open_scenario(), cfg);
  CHECK(sol.status == SolveStatus::Optimal);
  double umax = 0;
  for (const auto& u : sol.u_sequence) umax = std::max(umax, u.vec().cwiseAbs().maxCoeff());
  CHECK(umax < 1e-6);
  CHECK(sol.cost < 1e-10);
}

TEST_CASE("mpc: distant goal saturates the first input toward it") {
  // goal 0.1 m along +x, bounds 0.05 m/s: the bang solution pushes at the bound
  const Output y0 = two_terminal_output(Pose2(0, 0, 0), Pose2(-0.1, 0, 0));
  const Pose2 goal(0.1, 0.0, 0.0);
  MpcConfig cfg;
  const auto sol = solve_tm_mpc(y0, rigid_at(y0), goal, open_scenario(), cfg);
  CHECK(sol.u_sequence[0].vx > 0.045);
  CHECK(std::abs(sol.u_sequence[0].vy) < 1e-3);
  CHECK(std::abs(sol.u_sequence[0].omega) < 1e-3);
}

TEST_CASE("mpc: obstacle on the path keeps predicted margins non-positive") {
  Scenario sc = open_scenario();
  sc.obstacles.push_back({{0.15, 0.0}, 0.03});  // directly between start and goal
  const Output y0 = two_terminal_output(Pose2(0, 0, 0), Pose2(-0.05, 0, 0));
  const Pose2 goal(0.35, 0.0, 0.0);
  MpcConfig cfg;
  const auto sol = solve_tm_mpc(y0, rigid_at(y0), goal, sc, cfg);
  REQUIRE(sol.status == SolveStatus::Optimal);
  for (const auto& margins : sol.constraint_margins)
    CHECK(margins.maxCoeff() < 1e-6);

  // versus an unconstrained solve: the obstacle must deflect the plan
  const auto free_sol = solve_tm_mpc(y0, rigid_at(y0), goal, open_scenario(), cfg);
  double worst = -1e9;
  for (const auto& yk : free_sol.predicted_y) {
    Output o;
    o.poses = {Pose2(yk[0], yk[1], yk[2]), Pose2(yk[3], yk[4], yk[5])};
    o.status = y0.status;
    worst = std::max(worst, check_constraints(o, sc).maxCoeff());
  }
  CHECK(worst > 0.0);  // the unconstrained optimum would violate
}

TEST_CASE("mpc: SCP costs are non-increasing and warm starts are consistent") {
  Scenario sc = open_scenario();
  sc.obstacles.push_back({{0.2, 0.05}, 0.04});
  const Output y0 = two_terminal_output(Pose2(0, 0, 0), Pose2(0.1, 0.2, 0));
  const Pose2 goal(0.4, -0.1, 0.3);
  MpcConfig cfg;
  cfg.scp_iterations = 4;
  const auto sol = solve_tm_mpc(y0, rigid_at(y0), goal, sc, cfg);
  for (size_t i = 1; i < sol.scp_costs.size(); ++i)
    CHECK(sol.scp_costs[i] <= sol.scp_costs[i - 1] + 1e-9);

  // re-solving the unchanged problem from its own solution changes nothing
  const auto sol2 = solve_tm_mpc(y0, rigid_at(y0), goal, sc, cfg, &sol);
  // the warm start shifts by one step, so compare against a fresh solve
  const auto sol3 = solve_tm_mpc(y0, rigid_at(y0), goal, sc, cfg, &sol2);
  CHECK((sol2.u_sequence[0].vec() - sol3.u_sequence[0].vec()).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("mpc: closed-loop convergence on the rigid plant") {
  // plant == model == B_rb; goal offset 0.2 m and 0.4 rad
  MpcConfig cfg;
  const Pose2 goal(0.25, 0.12, 0.4);
  Output y = two_terminal_output(Pose2(0.05, 0.0, 0.0), Pose2(-0.1, -0.05, 0.2));
  const Scenario sc = open_scenario();
  MpcSolution warm;
  bool have_warm = false;
  int steps = 0;
  for (; steps < cfg.max_tm_steps; ++steps) {
    if (goal_reached(y.poses[0], goal, cfg)) break;
    const auto sol =
        solve_tm_mpc(y, rigid_at(y), goal, sc, cfg, have_warm ? &warm : nullptr);
    const Eigen::VectorXd ydot = rigid_at(y) * sol.u_sequence[0].vec();
    Eigen::VectorXd yv = y.vec() + cfg.dt * ydot;
    y.poses[0] = Pose2(yv[0], yv[1], yv[2]);
    y.poses[1] = Pose2(yv[3], yv[4], yv[5]);
    warm = sol;
    have_warm = true;
  }
  CHECK(steps < cfg.max_tm_steps);
  CHECK(d_beta(y.poses[0], goal, cfg.beta) < cfg.goal_tol);
}

TEST_CASE("stage and terminal costs") {
  MpcConfig cfg;
  cfg.q = Eigen::Vector3d::Ones();
  cfg.q_delta = Eigen::Vector3d::Ones();
  const Pose2 goal(0.3, -0.2, 0.7);
  const Output at_goal = two_terminal_output(goal, Pose2(0, 0, 0));

  CHECK(stage_cost(at_goal, Twist2(), Twist2(), goal, cfg) == doctest::Approx(0.0));
  // u = (1,0,0), u_prev = 0, Q = Q_delta = I, held at goal -> 1 + 1 = 2
  CHECK(stage_cost(at_goal, Twist2(1, 0, 0), Twist2(), goal, cfg) == doctest::Approx(2.0));

  cfg.terminal_weight = 0.0;
  const Output far = two_terminal_output(Pose2(9, 9, 1), Pose2(0, 0, 0));
  CHECK(terminal_cost(far, goal, cfg) == 0.0);  // p = 0 kills the terminal cost
  cfg.terminal_weight = 10.0;
  CHECK(terminal_cost(far, goal, cfg) ==
        doctest::Approx(10.0 * d_beta(far.poses[0], goal, cfg.beta)));
}

TEST_CASE("goal_from_receptacle composes SE(2) poses") {
  const Pose2 r(0, 0, M_PI / 2);
  const Pose2 off(0.1, 0, 0);
  const Pose2 g = goal_from_receptacle(r, off);
  CHECK(g.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g.y == doctest::Approx(0.1));
  CHECK(g.theta == doctest::Approx(M_PI / 2));

  // zero offset -> goal equals the receptacle pose
  const Pose2 g0 = goal_from_receptacle(Pose2(0.4, 0.5, -1.2), Pose2());
  CHECK(g0.x == 0.4);
  CHECK(g0.theta == doctest::Approx(-1.2));

  // composition then inverse-composition recovers the offset
  const Pose2 rec(0.3, -0.2, 0.9);
  const Pose2 off2(0.07, -0.03, 0.4);
  const Pose2 back = rec.inverse().compose(goal_from_receptacle(rec, off2));
  CHECK(back.x == doctest::Approx(off2.x).epsilon(1e-12));
  CHECK(back.y == doctest::Approx(off2.y).epsilon(1e-12));
  CHECK(back.theta == doctest::Approx(off2.theta).epsilon(1e-12));
}

TEST_CASE("goal_reached boundary is strict") {
  MpcConfig cfg;
  cfg.goal_tol = 1e-4;
  cfg.beta = 0.5;
  const Pose2 g(0.2, 0.1, 0.3);
  CHECK(goal_reached(g, g, cfg));
  // construct d_beta exactly equal to the tolerance: translation sqrt(eps_g)
  const Pose2 at_tol(0.2 + std::sqrt(cfg.goal_tol), 0.1, 0.3);
  CHECK(d_beta(at_tol, g, cfg.beta) == doctest::Approx(cfg.goal_tol));
  CHECK_FALSE(goal_reached(at_tol, g, cfg));
}
