#include <cmath>
#include <random>

#include "doctest.h"
#include "dlon/errors.hpp"
#include "dlon/planner.hpp"

using namespace dlon;

namespace {

Scenario box_scenario() {
  Scenario sc;
  sc.x_min = 0;
  sc.y_min = 0;
  sc.x_max = 1.2;
  sc.y_max = 0.9;
  sc.terminal_radius = 0.03;
  sc.clearance = 0.01;
  return sc;
}

Output outputs_at(const std::vector<Pose2>& poses, const std::vector<TerminalStatus>& st) {
  Output y;
  y.poses = poses;
  y.status = st;
  return y;
}

// exhaustive oracle for SELECT
std::optional<int> select_oracle(const Output& y, const Scenario& sc) {
  std::optional<int> best;
  double best_m = -1e300;
  for (int t = 0; t < y.size(); ++t) {
    if (y.status[t] != TerminalStatus::Free) continue;
    if (!sc.in_workspace(y.poses[t])) continue;
    double m = -1e300;
    for (const auto& o : sc.obstacles)
      m = std::max(m, sc.safety_radius(o) - (y.poses[t].position() - o.center).norm());
    if (m >= 0.0) continue;
    if (!best.has_value() || m > best_m) {
      best_m = m;
      best = t;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("select_terminal: picks the terminal closest to violation") {
  Scenario sc = box_scenario();
  sc.obstacles.push_back({{0.6, 0.45}, 0.05});
  const double r_to = sc.safety_radius(sc.obstacles[0]);
  // margins -0.05 and -0.20
  const Output y = outputs_at({Pose2(0.6 + r_to + 0.05, 0.45, 0),
                               Pose2(0.6 - r_to - 0.20, 0.45, 0)},
                              {TerminalStatus::Free, TerminalStatus::Free});
  CHECK(select_terminal(y, sc).value() == 0);
}

TEST_CASE("select_terminal: mated, held, violating and out-of-workspace terminals") {
  Scenario sc = box_scenario();
  sc.obstacles.push_back({{0.6, 0.45}, 0.05});

  // all terminals mated -> none
  const Output all_mated = outputs_at({Pose2(0.2, 0.2, 0), Pose2(0.9, 0.6, 0)},
                                      {TerminalStatus::Mated, TerminalStatus::Mated});
  CHECK_FALSE(select_terminal(all_mated, sc).has_value());

  // single free terminal outside the workspace -> none
  const Output outside = outputs_at({Pose2(1.5, 0.2, 0), Pose2(0.9, 0.6, 0)},
                                    {TerminalStatus::Free, TerminalStatus::Mated});
  CHECK_FALSE(select_terminal(outside, sc).has_value());

  // a violating terminal is not graspable
  const Output violating = outputs_at({Pose2(0.62, 0.45, 0), Pose2(0.9, 0.6, 0)},
                                      {TerminalStatus::Free, TerminalStatus::Free});
  CHECK(select_terminal(violating, sc).value() == 1);

  // held terminals are never candidates
  const Output with_held = outputs_at({Pose2(0.2, 0.2, 0), Pose2(0.9, 0.6, 0)},
                                      {TerminalStatus::Held, TerminalStatus::Free});
  CHECK(select_terminal(with_held, sc).value() == 1);
}

TEST_CASE("select_terminal agrees with the enumeration oracle") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> px(-0.2, 1.4), py(-0.2, 1.1), pr(0.02, 0.08);
  std::uniform_int_distribution<int> status_d(0, 3), nt_d(2, 5), no_d(0, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    Scenario sc = box_scenario();
    const int no = no_d(rng);
    for (int o = 0; o < no; ++o) sc.obstacles.push_back({{px(rng), py(rng)}, pr(rng)});
    const int nt = nt_d(rng);
    std::vector<Pose2> poses;
    std::vector<TerminalStatus> st;
    for (int t = 0; t < nt; ++t) {
      poses.push_back(Pose2(px(rng), py(rng), 0));
      const int s = status_d(rng);
      st.push_back(s == 0 ? TerminalStatus::Mated
                          : (s == 1 ? TerminalStatus::Held : TerminalStatus::Free));
    }
    const Output y = outputs_at(poses, st);
    const auto got = select_terminal(y, sc);
    const auto want = select_oracle(y, sc);
    CHECK(got.has_value() == want.has_value());
    if (got && want) CHECK(*got == *want);
  }
}

namespace {

// tiny two-terminal network for fast installation tests
DlonTopology pair_topology() {
  BranchedSpec spec;
  spec.link_length = 0.1;
  spec.branch_links = {1, 1};
  spec.branch_rest = {0.0, M_PI};
  return make_branched_topology(spec);
}

Scenario pair_scenario() {
  Scenario sc = box_scenario();
  // goals exactly at the rest tips of a network rooted at (0.5, 0.4, 0)
  sc.receptacles = {{Pose2(0.69, 0.4, 0), Pose2(-0.09, 0, 0)},
                    {Pose2(0.21, 0.4, M_PI), Pose2(-0.09, 0, 0)}};
  return sc;
}

}  // namespace

TEST_CASE("install: terminals already at their goals mate with zero-length TMs") {
  const auto topo = pair_topology();
  const auto sc = pair_scenario();
  const SimState init = make_initial_state(topo, {0.5, 0.4, 0}, {});
  MpcConfig cfg;
  const auto res = install_dlon(init, topo, sc, cfg, ModelConfig{}, ModelKind::Composite);
  CHECK(res.report.success);
  REQUIRE(res.report.tms.size() == 2);
  for (const auto& tm : res.report.tms) {
    CHECK(tm.goal_reached);
    CHECK(tm.steps_used == 0);  // zero-length manipulation
  }
  CHECK(res.final_state.terminal_status[0] == TerminalStatus::Mated);
  CHECK(res.final_state.terminal_status[1] == TerminalStatus::Mated);
}

TEST_CASE("install: all terminals in violation yields an empty report") {
  const auto topo = pair_topology();
  Scenario sc = pair_scenario();
  sc.obstacles.push_back({{0.6, 0.4}, 0.05});   // covers terminal 0
  sc.obstacles.push_back({{0.4, 0.4}, 0.05});   // covers terminal 1
  const SimState init = make_initial_state(topo, {0.5, 0.4, 0}, {});
  const auto res = install_dlon(init, topo, sc, MpcConfig{}, ModelConfig{},
                                ModelKind::Composite);
  CHECK(res.report.tms.empty());
  CHECK_FALSE(res.report.success);
}

TEST_CASE("install: blend weight restarts at 1 and decays geometrically per TM") {
  const auto topo = pair_topology();
  Scenario sc = pair_scenario();
  // move goal 0 a few centimeters so the first TM takes several steps
  sc.receptacles[0].pose = Pose2(0.74, 0.43, 0);
  const SimState init = make_initial_state(topo, {0.5, 0.4, 0}, {});
  ModelConfig mc;
  std::vector<InstallEvent> events;
  const auto res = install_dlon(init, topo, sc, MpcConfig{}, mc, ModelKind::Composite, {},
                                [&](const InstallEvent& e) { events.push_back(e); });
  CHECK(res.report.success);
  REQUIRE(!events.empty());
  int k = 0;
  int held = events.front().held;
  for (const auto& e : events) {
    if (e.held != held) break;  // first TM only
    CHECK(e.alpha == doctest::Approx(std::pow(mc.gamma, k)).epsilon(1e-12));
    ++k;
  }
  CHECK(k >= 2);
}

TEST_CASE("install: failed manipulations retry at most twice then abort") {
  const auto topo = pair_topology();
  Scenario sc = pair_scenario();
  sc.receptacles[0].pose = Pose2(1.15, 0.85, 0);  // far goal, unreachable in 4 steps
  const SimState init = make_initial_state(topo, {0.5, 0.4, 0}, {});
  MpcConfig cfg;
  cfg.max_tm_steps = 4;
  const auto res = install_dlon(init, topo, sc, cfg, ModelConfig{}, ModelKind::Composite);
  CHECK_FALSE(res.report.success);
  int failures = 0;
  for (const auto& tm : res.report.tms)
    if (tm.terminal == 0 && !tm.goal_reached) ++failures;
  CHECK(failures == 3);  // first attempt plus two retries
}
