#include <cmath>
#include <random>

#include "doctest.h"
#include "dlon/errors.hpp"
#include "dlon/sim.hpp"

using namespace dlon;

namespace {

// Two collinear links joined at the origin; terminal 0 is the root tip at
// (+len, 0), terminal 1 the opposite tip at (-len, 0).
DlonTopology straight_pair(double len, double stiffness, double friction) {
  BranchedSpec spec;
  spec.link_length = len;
  spec.branch_links = {1, 1};
  spec.branch_rest = {0.0, M_PI};
  spec.joint.stiffness = stiffness;
  spec.joint.friction_torque = friction;
  spec.joint.angle_limit = 3.0;
  return make_branched_topology(spec);
}

DlonTopology default_topology() { return make_branched_topology(BranchedSpec{}); }

SimState rest_state(const DlonTopology& topo, const Pose2& root = {}) {
  return make_initial_state(topo, root, {});
}

Scenario open_scenario() {
  Scenario sc;
  sc.x_min = -10;
  sc.y_min = -10;
  sc.x_max = 10;
  sc.y_max = 10;
  return sc;
}

}  // namespace

TEST_CASE("observe: zero-angle kinematics of a straight chain") {
  BranchedSpec spec;
  spec.branch_links = {3, 2};
  spec.branch_rest = {0.0, M_PI};
  spec.link_length = 0.1;
  const auto topo = make_branched_topology(spec);
  const auto y = observe(rest_state(topo), topo);
  CHECK(y.poses[0].x == doctest::Approx(0.3).epsilon(1e-12));  // sum of branch-0 lengths
  CHECK(y.poses[0].y == doctest::Approx(0.0));
  CHECK(y.poses[0].theta == doctest::Approx(0.0));
  CHECK(y.poses[1].x == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("observe: hand kinematics with one bent joint") {
  // serial (a, b) chain plus a stub branch to form a valid network
  const double a = 0.12, b = 0.07;
  DlonTopology topo;
  topo.links.push_back({-1, 0.0, a, {}});
  topo.links.push_back({0, a, b, {}});
  LinkDef stub{0, 0.0, 0.05, {}};
  stub.joint.rest_angle = M_PI;
  topo.links.push_back(stub);
  topo.terminal_links = {1, 2};
  topo.validate();

  SimState s = rest_state(topo);
  s.joint_angles[0] = M_PI / 2;  // joint of link 1
  const auto y = observe(s, topo);
  CHECK(y.poses[0].x == doctest::Approx(a).epsilon(1e-12));
  CHECK(y.poses[0].y == doctest::Approx(b).epsilon(1e-12));
  CHECK(y.poses[0].theta == doctest::Approx(M_PI / 2));
}

TEST_CASE("observe is invariant to terminal status changes") {
  const auto topo = default_topology();
  SimState s = make_initial_state(topo, {0.3, 0.2, 0.4}, {0.2, -0.2, 0.3});
  const auto y0 = observe(s, topo);
  s.terminal_status[1] = TerminalStatus::Mated;
  s.mated_poses[1] = Pose2(9, 9, 0);  // geometry must ignore this
  const auto y1 = observe(s, topo);
  for (int t = 0; t < y0.size(); ++t) {
    CHECK(y0.poses[t].x == y1.poses[t].x);
    CHECK(y0.poses[t].y == y1.poses[t].y);
    CHECK(y0.poses[t].theta == y1.poses[t].theta);
  }
}

TEST_CASE("re-rooting leaves world-frame terminal poses unchanged") {
  const auto topo = default_topology();
  SimState s = make_initial_state(topo, {0.5, 0.3, 0.7}, {0.25, -0.2, 0.3});
  const auto y0 = observe(s, topo);
  for (int t = 0; t < topo.terminal_count(); ++t) {
    const auto held = hold_terminal(s, topo, t);
    const auto y1 = observe(held, topo);
    for (int i = 0; i < y0.size(); ++i) {
      CHECK(y1.poses[i].x == doctest::Approx(y0.poses[i].x).epsilon(1e-12));
      CHECK(y1.poses[i].y == doctest::Approx(y0.poses[i].y).epsilon(1e-12));
      CHECK(y1.poses[i].theta == doctest::Approx(y0.poses[i].theta).epsilon(1e-12));
    }
  }
}

TEST_CASE("step: fixed point at rest with u = 0") {
  const auto topo = default_topology();
  SimState s = hold_terminal(rest_state(topo), topo, 0);
  const auto s1 = step(s, topo, Twist2(), 1.0 / 240.0);
  CHECK((s1.joint_angles - s.joint_angles).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  CHECK(s1.root_pose.x == s.root_pose.x);
  CHECK(s1.root_pose.y == s.root_pose.y);
}

TEST_CASE("step: rejects calls with no held terminal") {
  const auto topo = default_topology();
  CHECK_THROWS_AS(step(rest_state(topo), topo, Twist2(), 1.0 / 240.0), NoHeldTerminal);
}

TEST_CASE("step: rigid drag of a straight two-link chain under axial pull") {
  const auto topo = straight_pair(0.1, 0.0, 0.0);  // zero stiffness and friction
  SimState s = hold_terminal(rest_state(topo), topo, 0);
  const auto y0 = observe(s, topo);
  const double dt = 1.0 / 240.0;
  for (int i = 0; i < 240; ++i) s = step(s, topo, {0.1, 0, 0}, dt);
  const auto y1 = observe(s, topo);
  CHECK(y1.poses[0].x - y0.poses[0].x == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(y1.poses[1].x - y0.poses[1].x == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(y1.poses[1].y - y0.poses[1].y == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("step: joint sticks when elastic torque is below friction") {
  auto topo = default_topology();
  const auto& jp = topo.links[1].joint;
  const double delta = 0.5 * jp.friction_torque / jp.stiffness;  // stick by construction
  SimState s = hold_terminal(rest_state(topo), topo, 0);
  s.joint_angles[4] += delta;
  const auto s1 = step(s, topo, Twist2(), 1.0 / 240.0);
  CHECK(s1.joint_angles[4] == s.joint_angles[4]);
}

TEST_CASE("step: first-order convergence under dt refinement") {
  BranchedSpec spec;
  spec.joint.friction_torque = 0.0;  // smooth dynamics for the order test
  const auto topo = make_branched_topology(spec);
  auto endpoint = [&](double fs) {
    SimState s = hold_terminal(make_initial_state(topo, {}, {0.3, -0.3, 0.2}), topo, 0);
    const double dt = 1.0 / fs;
    for (int i = 0; i < static_cast<int>(fs); ++i) s = step(s, topo, {0.03, 0.02, 0.2}, dt);
    return observe(s, topo).vec();
  };
  const auto e240 = endpoint(240), e480 = endpoint(480), e960 = endpoint(960);
  const double d1 = (e480 - e240).cwiseAbs().maxCoeff();
  const double d2 = (e960 - e480).cwiseAbs().maxCoeff();
  CHECK(d1 < 2e-3);
  CHECK(d2 < 0.75 * d1);  // roughly halves with dt
}

TEST_CASE("grasp/release transitions and errors") {
  const auto topo = default_topology();
  const auto sc = open_scenario();
  SimState s = make_initial_state(topo, {0.0, 0.0, 0.0}, {});

  const auto held = grasp(s, topo, 1, sc);
  CHECK(held.terminal_status[1] == TerminalStatus::Held);
  CHECK(*held.held_terminal() == 1);
  CHECK_THROWS_AS(grasp(held, topo, 0, sc), GraspInfeasible);

  const auto freed = release(held);
  CHECK(freed.terminal_status[1] == TerminalStatus::Free);

  // clearance violation
  Scenario tight = sc;
  const auto y = observe(s, topo);
  tight.obstacles.push_back({y.poses[2].position() + Eigen::Vector2d(0.01, 0), 0.03});
  CHECK_THROWS_AS(grasp(s, topo, 2, tight), GraspInfeasible);

  // workspace violation
  Scenario box = sc;
  box.x_min = y.poses[0].x + 0.1;
  CHECK_THROWS_AS(grasp(s, topo, 0, box), GraspInfeasible);
}

TEST_CASE("mate pins the terminal at its goal under subsequent manipulation") {
  const auto topo = default_topology();
  SimState s = hold_terminal(make_initial_state(topo, {}, {0.1, -0.1, 0.1}), topo, 0);
  const Pose2 goal = observe(s, topo).poses[0];

  CHECK_THROWS_AS(mate(s, topo, 0, Pose2(goal.x + 1.0, goal.y, goal.theta), 0.01, 1e-4),
                  MateNotAtGoal);

  s = mate(s, topo, 0, goal, 0.01, 1e-4);
  CHECK(s.terminal_status[0] == TerminalStatus::Mated);

  // drag another terminal around; the mated pose must hold within tolerance
  s = hold_terminal(s, topo, 1);
  const double dt = 1.0 / 240.0;
  SimParams prm;
  for (int i = 0; i < 480; ++i) s = step(s, topo, {0.04, -0.03, 0.2}, dt, prm);
  const auto y = observe(s, topo);
  CHECK((y.poses[0].position() - goal.position()).norm() < prm.pin_tolerance);
}

TEST_CASE("relax_to_equilibrium: fixed point and perturbation recovery") {
  const auto topo = default_topology();
  SimParams prm;
  SimState s = make_initial_state(topo, {}, {0.2, -0.25, 0.3});
  s = settle(s, topo, 2.0, prm);
  std::vector<Pose2> clamps = observe(s, topo).poses;

  const auto eq = relax_to_equilibrium(s, topo, clamps, prm);
  const auto eq2 = relax_to_equilibrium(eq, topo, clamps, prm);  // already relaxed
  CHECK((eq2.joint_angles - eq.joint_angles).cwiseAbs().maxCoeff() < 1e-3);

  // random joint perturbations relax back to the same equilibrium
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int trial = 0; trial < 3; ++trial) {
    SimState p = eq;
    for (int j = 0; j < topo.joint_count(); ++j) p.joint_angles[j] += d(rng);
    const auto back = relax_to_equilibrium(p, topo, clamps, prm);
    const double rms = std::sqrt((back.joint_angles - eq.joint_angles).squaredNorm() /
                                 topo.joint_count());
    CHECK(rms < 1e-3);
  }
}

TEST_CASE("relax_to_equilibrium: infeasible clamp does not converge") {
  const auto topo = straight_pair(0.1, 0.05, 0.0);
  SimParams prm;
  prm.relax_max_iters = 20000;
  const SimState s = rest_state(topo);
  // total chain length 0.2, clamps 0.5 apart
  std::vector<Pose2> clamps = {Pose2(0.25, 0, 0), Pose2(-0.25, 0, M_PI)};
  CHECK_THROWS_AS(relax_to_equilibrium(s, topo, clamps, prm), NoConvergence);
}

TEST_CASE("check_constraints margins") {
  Scenario sc = open_scenario();
  sc.terminal_radius = 0.03;
  sc.clearance = 0.01;
  sc.obstacles.push_back({{1.0, 0.0}, 0.05});
  const double r_to = sc.safety_radius(sc.obstacles[0]);
  CHECK(r_to == doctest::Approx(0.09));

  Output y;
  y.status = {TerminalStatus::Free, TerminalStatus::Free};
  y.poses = {Pose2(1.0 - r_to, 0, 0), Pose2(1.0 - r_to - 0.1, 0, 0)};
  const auto c = check_constraints(y, sc);
  CHECK(c.size() == 2 * 1 + 2);
  CHECK(c[0] == doctest::Approx(0.0).epsilon(1e-12));   // exactly at the boundary
  CHECK(c[1] == doctest::Approx(-0.1).epsilon(1e-9));   // 0.1 beyond it

  // empty obstacle set: only workspace margins
  Scenario empty = open_scenario();
  const auto cw = check_constraints(y, empty);
  CHECK(cw.size() == 2);
  CHECK(cw[0] < 0.0);

  // outside the workspace: positive exit distance
  Scenario small = open_scenario();
  small.x_max = 0.5;
  const auto co = check_constraints(y, small);
  CHECK(co[0] == doctest::Approx(y.poses[0].x - 0.5));
}

TEST_CASE("rigidity limit: very stiff joints move as a rigid body") {
  BranchedSpec spec;
  spec.joint.stiffness *= 1000.0;
  spec.joint.friction_torque *= 1000.0;
  const auto topo = make_branched_topology(spec);
  SimState s = hold_terminal(make_initial_state(topo, {}, {}), topo, 0);
  const auto q0 = s.joint_angles;
  const double dt = 1.0 / 240.0;
  for (int i = 0; i < 480; ++i) s = step(s, topo, {0.05, -0.02, 0.3}, dt);
  CHECK((s.joint_angles - q0).cwiseAbs().maxCoeff() < 1e-9);  // all joints stuck
}
