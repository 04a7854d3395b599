#include "dlon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "dlon/errors.hpp"

namespace dlon {

namespace {

// z-component of cross(a, b)
double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

const std::vector<std::vector<int>>& DlonTopology::children() const {
  if (children_.empty() && !links.empty()) {
    children_.assign(links.size(), {});
    for (int i = 1; i < link_count(); ++i) children_[links[i].parent].push_back(i);
  }
  return children_;
}

void DlonTopology::validate() const {
  if (links.empty()) throw Error("topology: no links");
  if (links[0].parent != -1) throw Error("topology: links[0] must be the root");
  for (int i = 1; i < link_count(); ++i) {
    const auto& l = links[i];
    if (l.parent < 0 || l.parent >= i) throw Error("topology: parent must precede child");
    if (l.parent_offset < 0.0 || l.parent_offset > links[l.parent].length + 1e-12)
      throw Error("topology: hinge offset outside parent link");
    if (!(l.joint.angle_limit > 0.0 && l.joint.angle_limit < M_PI))
      throw Error("topology: angle_limit must lie in (0, pi)");
    if (!(l.joint.damping > 0.0)) throw Error("topology: damping must be positive");
    if (l.joint.stiffness < 0.0 || l.joint.friction_torque < 0.0)
      throw Error("topology: negative joint parameter");
  }
  for (const auto& l : links)
    if (!(l.length > 0.0)) throw Error("topology: link lengths must be positive");
  if (terminal_count() < 2) throw Error("topology: needs at least two terminals");
  const auto& kids = children();
  // A terminal needs a free distal tip: no child hinged at the far end.
  std::vector<bool> distal_child(links.size(), false);
  for (int i = 1; i < link_count(); ++i)
    if (links[i].parent_offset >= links[links[i].parent].length - 1e-12)
      distal_child[links[i].parent] = true;
  std::vector<bool> is_terminal(links.size(), false);
  for (int t : terminal_links) {
    if (t < 0 || t >= link_count()) throw Error("topology: terminal link out of range");
    if (distal_child[t]) throw Error("topology: terminal link has no free tip");
    if (is_terminal[t]) throw Error("topology: duplicate terminal link");
    is_terminal[t] = true;
  }
  for (int i = 1; i < link_count(); ++i)
    if (kids[i].empty() && !is_terminal[i])
      throw Error("topology: every branch must end in a terminal");
}

std::uint64_t DlonTopology::hash() const {
  std::string s;
  char buf[256];
  for (const auto& l : links) {
    std::snprintf(buf, sizeof buf, "L %d %.17g %.17g J %.17g %.17g %.17g %.17g %.17g\n",
                  l.parent, l.parent_offset, l.length, l.joint.rest_angle,
                  l.joint.stiffness, l.joint.damping, l.joint.angle_limit,
                  l.joint.friction_torque);
    s += buf;
  }
  for (int t : terminal_links) {
    std::snprintf(buf, sizeof buf, "T %d\n", t);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "D %.17g\n", link_drag);
  s += buf;
  return fnv1a(s);
}

DlonTopology make_branched_topology(const BranchedSpec& spec) {
  if (spec.branch_links.size() < 2) throw Error("branched topology: needs >= 2 branches");
  if (spec.branch_rest.size() != spec.branch_links.size())
    throw Error("branched topology: branch_rest size mismatch");
  DlonTopology topo;
  topo.link_drag = spec.link_drag;
  for (size_t b = 0; b < spec.branch_links.size(); ++b) {
    if (spec.branch_links[b] < 1) throw Error("branched topology: empty branch");
    std::vector<int> joints;
    for (int i = 0; i < spec.branch_links[b]; ++i) {
      LinkDef l;
      l.length = spec.link_length;
      l.joint = spec.joint;
      if (b == 0 && i == 0) {
        l.parent = -1;  // root
      } else if (i == 0) {
        l.parent = 0;        // junction: hinge at the root link's proximal end
        l.parent_offset = 0.0;
        l.joint.rest_angle = spec.branch_rest[b];
      } else {
        l.parent = topo.link_count() - 1;
        l.parent_offset = spec.link_length;
      }
      topo.links.push_back(l);
      if (l.parent != -1) joints.push_back(topo.link_count() - 2);  // joint id = link id - 1
    }
    topo.terminal_links.push_back(topo.link_count() - 1);
    topo.branch_joints.push_back(std::move(joints));
  }
  topo.validate();
  return topo;
}

std::optional<int> SimState::held_terminal() const {
  for (size_t t = 0; t < terminal_status.size(); ++t)
    if (terminal_status[t] == TerminalStatus::Held) return static_cast<int>(t);
  return std::nullopt;
}

SimState make_initial_state(const DlonTopology& topo, const Pose2& root_pose,
                            const std::vector<double>& branch_curl) {
  SimState s;
  s.root_link = 0;
  s.root_pose = root_pose;
  s.joint_angles = Eigen::VectorXd::Zero(topo.joint_count());
  for (int j = 0; j < topo.joint_count(); ++j)
    s.joint_angles[j] = topo.links[j + 1].joint.rest_angle;
  for (size_t b = 0; b < topo.branch_joints.size() && b < branch_curl.size(); ++b)
    for (int j : topo.branch_joints[b]) {
      const auto& jp = topo.links[j + 1].joint;
      s.joint_angles[j] = std::clamp(s.joint_angles[j] + branch_curl[b],
                                     jp.rest_angle - jp.angle_limit,
                                     jp.rest_angle + jp.angle_limit);
    }
  s.terminal_status.assign(topo.terminal_count(), TerminalStatus::Free);
  s.mated_poses.assign(topo.terminal_count(), Pose2());
  return s;
}

Pose2 Scenario::goal(int terminal) const {
  const auto& r = receptacles.at(terminal);
  return r.pose.compose(r.insertion_offset);
}

void Scenario::validate() const {
  if (!(terminal_radius > 0.0 && clearance > 0.0)) throw Error("scenario: radii must be positive");
  if (!(x_max > x_min && y_max > y_min)) throw Error("scenario: empty workspace");
  for (const auto& o : obstacles)
    if (!(o.radius > 0.0)) throw Error("scenario: obstacle radius must be positive");
  for (size_t t = 0; t < receptacles.size(); ++t)
    if (!in_workspace(goal(static_cast<int>(t))))
      throw Error("scenario: goal outside workspace");
}

int Output::held() const {
  for (size_t t = 0; t < status.size(); ++t)
    if (status[t] == TerminalStatus::Held) return static_cast<int>(t);
  return -1;
}

Eigen::VectorXd Output::vec() const {
  Eigen::VectorXd v(3 * size());
  for (int t = 0; t < size(); ++t) v.segment<3>(3 * t) = poses[t].vec();
  return v;
}

namespace {

// Traversal of the link tree from the current root with consistent world poses.
// sign[l] is +1 when the edge into l was crossed parent->child, -1 otherwise.
struct Traversal {
  std::vector<Pose2> pose;
  std::vector<int> from;
  std::vector<int> joint;
  std::vector<int> sign;
};

Traversal traverse(const SimState& s, const DlonTopology& topo) {
  const int n = topo.link_count();
  Traversal tr;
  tr.pose.assign(n, Pose2());
  tr.from.assign(n, -1);
  tr.joint.assign(n, -1);
  tr.sign.assign(n, 0);
  std::vector<bool> seen(n, false);
  std::vector<int> stack{s.root_link};
  tr.pose[s.root_link] = s.root_pose;
  seen[s.root_link] = true;
  const auto& kids = topo.children();
  while (!stack.empty()) {
    const int l = stack.back();
    stack.pop_back();
    auto visit = [&](int next, int joint, int sign) {
      if (seen[next]) return;
      const int child = joint + 1;  // canonical child link of this edge
      const Pose2 local(topo.links[child].parent_offset, 0.0, s.joint_angles[joint]);
      tr.pose[next] = sign > 0 ? tr.pose[l].compose(local) : tr.pose[l].compose(local.inverse());
      tr.from[next] = l;
      tr.joint[next] = joint;
      tr.sign[next] = sign;
      seen[next] = true;
      stack.push_back(next);
    };
    if (topo.links[l].parent >= 0) visit(topo.links[l].parent, l - 1, -1);
    for (int c : kids[l]) visit(c, c - 1, +1);
  }
  return tr;
}

Pose2 tip_pose(const Traversal& tr, const DlonTopology& topo, int link) {
  return tr.pose[link].compose(Pose2(topo.links[link].length, 0.0, 0.0));
}

// Adds s * (cross(p - hinge_j, vec2) + moment) to tau[j] for each joint on the
// path root -> link; optionally accumulates the pin stiffness estimate.
struct PathAccumulator {
  const Traversal& tr;
  const SimState& state;

  template <typename Fn>
  void walk(int link, Fn&& fn) const {
    int l = link;
    while (l != state.root_link) {
      fn(tr.joint[l], tr.sign[l], tr.pose[tr.joint[l] + 1].position());
      l = tr.from[l];
    }
  }
};

struct Pin {
  int leaf;
  Pose2 target;
};

struct StepOptions {
  bool friction = true;
  bool drag = true;
  std::vector<Pin> extra_pins;    // used by relax_to_equilibrium
  bool mated_pins = true;
  double* max_rate = nullptr;     // out: max |desired joint rate| before limits
};

SimState step_core(const SimState& s, const DlonTopology& topo, const Twist2& u,
                   double dt, const SimParams& prm, const StepOptions& opt) {
  const int nj = topo.joint_count();
  const Traversal tr = traverse(s, topo);
  const PathAccumulator acc{tr, s};

  Eigen::VectorXd tau(nj);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(nj, nj);
  for (int j = 0; j < nj; ++j) {
    const auto& jp = topo.links[j + 1].joint;
    tau[j] = jp.stiffness * (s.joint_angles[j] - jp.rest_angle);
    hess(j, j) = jp.stiffness;
  }

  // Mated-terminal penalty pins and relax clamps.
  std::vector<Pin> pins = opt.extra_pins;
  if (opt.mated_pins)
    for (int t = 0; t < topo.terminal_count(); ++t)
      if (s.terminal_status[t] == TerminalStatus::Mated &&
          topo.terminal_links[t] != s.root_link)
        pins.push_back({topo.terminal_links[t], s.mated_poses[t]});

  for (const auto& pin : pins) {
    const Pose2 cur = tip_pose(tr, topo, pin.leaf);
    const Eigen::Vector2d e_pos = cur.position() - pin.target.position();
    const double e_th = normalize_angle(cur.theta - pin.target.theta);
    const Eigen::Vector2d force = prm.pin_stiffness_lin * e_pos;
    const double moment = prm.pin_stiffness_ang * e_th;
    const Eigen::Vector2d p = cur.position();
    struct PathEntry { int j; int sign; Eigen::Vector2d r; };
    std::vector<PathEntry> path;
    acc.walk(pin.leaf, [&](int j, int sign, const Eigen::Vector2d& hinge) {
      path.push_back({j, sign, p - hinge});
    });
    for (const auto& e : path) tau[e.j] += e.sign * (cross2(e.r, force) + moment);
    // Gauss-Newton Hessian of the pin energy, used by the implicit update.
    for (const auto& e1 : path)
      for (const auto& e2 : path)
        hess(e1.j, e2.j) += e1.sign * e2.sign *
            (prm.pin_stiffness_lin * e1.r.dot(e2.r) + prm.pin_stiffness_ang);
  }

  // Planar drag opposing the commanded bulk motion, evaluated on the rigid
  // velocity field about the held terminal. Produces the trailing deformation
  // of a harness dragged across a surface.
  const auto held = s.held_terminal();
  if (opt.drag && topo.link_drag > 0.0 && held) {
    const Eigen::Vector2d h = tip_pose(tr, topo, topo.terminal_links[*held]).position();
    for (int l = 0; l < topo.link_count(); ++l) {
      if (l == s.root_link) continue;
      const Eigen::Vector2d c = tr.pose[l].transform({topo.links[l].length / 2.0, 0.0});
      const Eigen::Vector2d v(u.vx - u.omega * (c.y() - h.y()),
                              u.vy + u.omega * (c.x() - h.x()));
      if (v.squaredNorm() < 1e-16) continue;
      acc.walk(l, [&](int j, int sign, const Eigen::Vector2d& hinge) {
        tau[j] += sign * topo.link_drag * cross2(c - hinge, v);
      });
    }
  }

  // Coulomb stick-slip: joints below the friction threshold do not move,
  // the rest see a torque reduced by it.
  std::vector<int> active;
  active.reserve(nj);
  for (int j = 0; j < nj; ++j) {
    const auto& jp = topo.links[j + 1].joint;
    if (opt.friction) {
      if (std::abs(tau[j]) <= jp.friction_torque) continue;  // stick
      tau[j] -= (tau[j] > 0 ? jp.friction_torque : -jp.friction_torque);
    }
    active.push_back(j);
  }

  SimState out = s;
  double max_rate = 0.0;
  if (!active.empty()) {
    // Backward-Euler on the linearized overdamped dynamics:
    // (D + dt H) qdot = -tau. Unconditionally stable under stiff pins.
    const int na = static_cast<int>(active.size());
    Eigen::MatrixXd lhs(na, na);
    Eigen::VectorXd rhs(na);
    for (int a = 0; a < na; ++a) {
      const auto& jp = topo.links[active[a] + 1].joint;
      rhs[a] = -tau[active[a]];
      for (int b = 0; b < na; ++b) lhs(a, b) = dt * hess(active[a], active[b]);
      lhs(a, a) += jp.damping;
    }
    const Eigen::VectorXd rate = lhs.ldlt().solve(rhs);
    for (int a = 0; a < na; ++a) {
      const int j = active[a];
      const auto& jp = topo.links[j + 1].joint;
      max_rate = std::max(max_rate, std::abs(rate[a]));
      out.joint_angles[j] = std::clamp(s.joint_angles[j] + dt * rate[a],
                                       jp.rest_angle - jp.angle_limit,
                                       jp.rest_angle + jp.angle_limit);
    }
  }
  if (opt.max_rate) *opt.max_rate = max_rate;

  // The held terminal tracks u exactly; the gripper sits at the link tip, so
  // rotation is about the tip, not the link origin.
  if (held && (u.vx != 0.0 || u.vy != 0.0 || u.omega != 0.0)) {
    const int leaf = topo.terminal_links[*held];
    if (leaf != s.root_link) throw Error("step: held terminal must be the root");
    const Pose2 tip = tip_pose(tr, topo, leaf);
    const Pose2 new_tip = integrate_pose(tip, u, dt);
    out.root_pose = new_tip.compose(Pose2(-topo.links[leaf].length, 0.0, 0.0));
  }
  return out;
}

}  // namespace

std::vector<Pose2> link_poses(const SimState& state, const DlonTopology& topo) {
  return traverse(state, topo).pose;
}

Output observe(const SimState& state, const DlonTopology& topo) {
  const Traversal tr = traverse(state, topo);
  Output y;
  y.poses.reserve(topo.terminal_count());
  for (int t = 0; t < topo.terminal_count(); ++t)
    y.poses.push_back(tip_pose(tr, topo, topo.terminal_links[t]));
  y.status = state.terminal_status;
  return y;
}

SimState step(const SimState& state, const DlonTopology& topo, const Twist2& u,
              double dt, const SimParams& params) {
  if (!state.held_terminal())
    throw NoHeldTerminal("step: no held terminal (use settle for free evolution)");
  if (!(dt > 0.0)) throw Error("step: dt must be > 0");
  return step_core(state, topo, u, dt, params, {});
}

SimState settle(const SimState& state, const DlonTopology& topo, double duration_s,
                const SimParams& params) {
  const double dt = 1.0 / params.fs;
  const int n = static_cast<int>(std::round(duration_s * params.fs));
  SimState s = state;
  for (int i = 0; i < n; ++i) s = step_core(s, topo, Twist2(), dt, params, {});
  return s;
}

SimState hold_terminal(const SimState& state, const DlonTopology& topo, int terminal) {
  if (state.held_terminal()) throw GraspInfeasible("grasp: another terminal is held");
  if (state.terminal_status.at(terminal) != TerminalStatus::Free)
    throw GraspInfeasible("grasp: terminal not free");
  const Traversal tr = traverse(state, topo);
  SimState out = state;
  out.root_link = topo.terminal_links[terminal];
  out.root_pose = tr.pose[out.root_link];
  out.terminal_status[terminal] = TerminalStatus::Held;
  return out;
}

SimState grasp(const SimState& state, const DlonTopology& topo, int terminal,
               const Scenario& scenario) {
  const Output y = observe(state, topo);
  const Pose2& p = y.poses.at(terminal);
  if (!scenario.in_workspace(p)) throw GraspInfeasible("grasp: terminal outside workspace");
  for (const auto& o : scenario.obstacles) {
    const double margin = scenario.safety_radius(o) - (p.position() - o.center).norm();
    if (margin > 0.0) throw GraspInfeasible("grasp: clearance violated");
  }
  return hold_terminal(state, topo, terminal);
}

SimState release(const SimState& state) {
  SimState out = state;
  const auto held = state.held_terminal();
  if (!held) throw NoHeldTerminal("release: no held terminal");
  out.terminal_status[*held] = TerminalStatus::Free;
  return out;
}

SimState mate(const SimState& state, const DlonTopology& topo, int terminal,
              const Pose2& goal, double beta, double eps_g) {
  if (state.terminal_status.at(terminal) != TerminalStatus::Held)
    throw Error("mate: terminal is not held");
  const Output y = observe(state, topo);
  if (!(d_beta(y.poses[terminal], goal, beta) < eps_g))
    throw MateNotAtGoal("mate: held terminal not within eps_g of goal");
  SimState out = state;
  // Insertion seats the terminal: pin exactly at the goal pose.
  out.terminal_status[terminal] = TerminalStatus::Mated;
  out.mated_poses[terminal] = goal;
  const int leaf = topo.terminal_links[terminal];
  out.root_link = leaf;
  out.root_pose = goal.compose(Pose2(-topo.links[leaf].length, 0.0, 0.0));
  return out;
}

SimState relax_to_equilibrium(const SimState& state, const DlonTopology& topo,
                              const std::vector<Pose2>& clamped_terminal_poses,
                              const SimParams& params) {
  if (static_cast<int>(clamped_terminal_poses.size()) != topo.terminal_count())
    throw DimensionMismatch("relax: one clamp pose required per terminal");
  const double dt = 1.0 / params.fs;

  // Anchor exactly at the first clamp; soft-pin the remaining terminals.
  SimState s = state;
  const int anchor_terminal = state.held_terminal().value_or(0);
  const int anchor_leaf = topo.terminal_links[anchor_terminal];
  s.root_link = anchor_leaf;
  s.root_pose = clamped_terminal_poses[anchor_terminal].compose(
      Pose2(-topo.links[anchor_leaf].length, 0.0, 0.0));

  StepOptions opt;
  opt.friction = false;
  opt.drag = false;
  opt.mated_pins = false;
  for (int t = 0; t < topo.terminal_count(); ++t)
    if (t != anchor_terminal) opt.extra_pins.push_back({topo.terminal_links[t],
                                                        clamped_terminal_poses[t]});
  double max_rate = 0.0;
  opt.max_rate = &max_rate;
  bool converged = false;
  for (int i = 0; i < params.relax_max_iters; ++i) {
    s = step_core(s, topo, Twist2(), dt, params, opt);
    if (max_rate < params.relax_rate_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NoConvergence("relax: joint rates did not settle (infeasible clamp?)");
  const Output y = observe(s, topo);
  for (int t = 0; t < topo.terminal_count(); ++t) {
    const double err = (y.poses[t].position() -
                        clamped_terminal_poses[t].position()).norm();
    if (err > 0.05) throw NoConvergence("relax: clamp not reproduced at equilibrium");
  }
  return s;
}

Eigen::VectorXd check_constraints(const Output& y, const Scenario& scenario) {
  const int nt = y.size();
  const int no = static_cast<int>(scenario.obstacles.size());
  Eigen::VectorXd c(nt * no + nt);
  int k = 0;
  for (int t = 0; t < nt; ++t)
    for (const auto& o : scenario.obstacles)
      c[k++] = scenario.safety_radius(o) - (y.poses[t].position() - o.center).norm();
  for (int t = 0; t < nt; ++t) {
    const Pose2& p = y.poses[t];
    c[k++] = std::max({scenario.x_min - p.x, p.x - scenario.x_max,
                       scenario.y_min - p.y, p.y - scenario.y_max});
  }
  return c;
}

}  // namespace dlon
