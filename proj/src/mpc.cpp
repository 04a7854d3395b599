#include "dlon/mpc.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "dlon/errors.hpp"
#include "dlon/qp.hpp"

namespace dlon {

namespace {

constexpr double kInf = 1e20;

std::vector<Eigen::VectorXd> rollout(const Eigen::VectorXd& y0, const Eigen::MatrixXd& b,
                                     const std::vector<Eigen::Vector3d>& u, double dt) {
  std::vector<Eigen::VectorXd> ys;
  ys.reserve(u.size() + 1);
  ys.push_back(y0);
  for (const auto& uk : u) ys.push_back(ys.back() + dt * (b * uk));
  return ys;
}

Output stacked_to_output(const Eigen::VectorXd& y, const std::vector<TerminalStatus>& status) {
  Output out;
  out.status = status;
  for (int t = 0; t < y.size() / 3; ++t)
    out.poses.push_back(Pose2(y[3 * t], y[3 * t + 1], y[3 * t + 2]));
  return out;
}

struct QpBuild {
  QpProblem prob;
  std::vector<int> soft_rows;  // rows relaxed by the shared slack
};

// Decision vector v = [u_0 ... u_{N-1}, s]. Dynamics are frozen at b_hat, so
// y_j = y0 + dt * b_hat * sum_{i<j} u_i is linear in the inputs.
QpBuild build_qp(const Eigen::VectorXd& y0, const Eigen::MatrixXd& b_hat, int held,
                 const Pose2& goal, const Scenario& sc, const MpcConfig& cfg,
                 const std::vector<Eigen::VectorXd>& nominal, const Eigen::Vector3d& u_prev) {
  const int n_steps = cfg.horizon;
  const int nv = 3 * n_steps + 1;
  const int s_idx = 3 * n_steps;
  const int nt = static_cast<int>(y0.size()) / 3;
  const double dt = cfg.dt;

  QpBuild qb;
  auto& p = qb.prob.p;
  auto& q = qb.prob.q;
  p = Eigen::MatrixXd::Zero(nv, nv);
  q = Eigen::VectorXd::Zero(nv);

  // control and control-increment costs
  for (int j = 0; j < n_steps; ++j)
    for (int c = 0; c < 3; ++c) p(3 * j + c, 3 * j + c) += 2.0 * cfg.q[c];
  for (int j = 0; j < n_steps; ++j)
    for (int c = 0; c < 3; ++c) {
      const double w = 2.0 * cfg.q_delta[c];
      if (j > 0) {
        p(3 * j + c, 3 * j + c) += w;
        p(3 * (j - 1) + c, 3 * (j - 1) + c) += w;
        p(3 * j + c, 3 * (j - 1) + c) -= w;
        p(3 * (j - 1) + c, 3 * j + c) -= w;
      } else {
        p(c, c) += w;
        q[c] -= w * u_prev[c];  // delta u_0 against the last executed input
      }
    }

  // Goal attraction on the held terminal: stage weight 1 at steps 1..N-1,
  // terminal weight p at N (step 0 is not a decision). The heading cost uses
  // the chord parameterization linearized about the nominal trajectory.
  std::vector<double> w(n_steps + 1, 1.0);
  w[n_steps] = cfg.terminal_weight;
  const Eigen::Matrix<double, 2, 3> b_pos = dt * b_hat.block(3 * held, 0, 2, 3);
  const Eigen::RowVector3d b_th = dt * b_hat.row(3 * held + 2);
  const Eigen::Vector2d pos0(y0[3 * held], y0[3 * held + 1]);
  const double th0 = y0[3 * held + 2];
  const Eigen::Vector2d a_pos = pos0 - goal.position();
  const Eigen::Matrix3d mm = b_pos.transpose() * b_pos;
  const Eigen::Vector3d ma = b_pos.transpose() * a_pos;
  const Eigen::Matrix3d tt = b_th.transpose() * b_th;

  std::vector<double> w_suffix(n_steps + 1, 0.0);
  std::vector<double> th_suffix(n_steps + 1, 0.0);  // sum_{j>i} w_j (th0 - th*_j)
  const Eigen::Vector2d c_goal(std::cos(goal.theta), std::sin(goal.theta));
  for (int j = n_steps; j >= 1; --j) {
    const double th_nom = nominal[j][3 * held + 2];
    const Eigen::Vector2d c_nom(std::cos(th_nom), std::sin(th_nom));
    const Eigen::Vector2d jac(-std::sin(th_nom), std::cos(th_nom));
    const double th_target = th_nom - jac.dot(c_nom - c_goal);
    w_suffix[j - 1] = w_suffix[j] + w[j];
    th_suffix[j - 1] = th_suffix[j] + w[j] * (th0 - th_target);
  }
  for (int i1 = 0; i1 < n_steps; ++i1) {
    for (int i2 = 0; i2 < n_steps; ++i2) {
      const double ws = w_suffix[std::max(i1, i2)];
      if (ws == 0.0) continue;
      p.block<3, 3>(3 * i1, 3 * i2) += 2.0 * ws * (mm + cfg.beta * tt);
    }
    q.segment<3>(3 * i1) +=
        2.0 * w_suffix[i1] * ma + 2.0 * cfg.beta * th_suffix[i1] * b_th.transpose();
  }

  // exact-penalty slack (linear weight dominates; the small curvature keeps
  // the QP strictly convex)
  p(s_idx, s_idx) += 2e-4;
  q[s_idx] += cfg.slack_weight;

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> lo, hi;
  auto add_row = [&](const Eigen::RowVectorXd& r, double l, double u, bool soft) {
    if (soft) qb.soft_rows.push_back(static_cast<int>(rows.size()));
    rows.push_back(r);
    lo.push_back(l);
    hi.push_back(u);
  };

  for (int j = 0; j < n_steps; ++j)
    for (int c = 0; c < 3; ++c) {
      Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
      r[3 * j + c] = 1.0;
      add_row(r, -cfg.u_max[c], cfg.u_max[c], false);
    }
  {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
    r[s_idx] = 1.0;
    add_row(r, 0.0, kInf, false);  // s >= 0
  }

  // Linearized obstacle margins and workspace sides for every terminal and
  // step, screened to those near activity along the nominal trajectory. All
  // of these share the slack.
  auto cumulative_row = [&](const Eigen::RowVector3d& coef, int j) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(nv);
    for (int i = 0; i < j; ++i) r.segment<3>(3 * i) = coef;
    r[s_idx] = -1.0;
    return r;
  };
  for (int j = 1; j <= n_steps; ++j)
    for (int t = 0; t < nt; ++t) {
      const Eigen::Vector2d p0(y0[3 * t], y0[3 * t + 1]);
      const Eigen::Vector2d p_nom(nominal[j][3 * t], nominal[j][3 * t + 1]);
      const Eigen::Matrix<double, 2, 3> b_t = dt * b_hat.block(3 * t, 0, 2, 3);
      for (const auto& o : sc.obstacles) {
        const double dist = (p_nom - o.center).norm();
        const double margin = sc.safety_radius(o) - dist;
        if (margin < -cfg.obstacle_screen) continue;
        const Eigen::Vector2d n_hat =
            dist > 1e-9 ? ((p_nom - o.center) / dist).eval() : Eigen::Vector2d(1, 0);
        const Eigen::RowVector3d coef = -(n_hat.transpose() * b_t);
        // margin - n'(p_j(u) - p_nom) <= s
        add_row(cumulative_row(coef, j), -kInf, -margin - n_hat.dot(p_nom - p0), true);
      }
      const Eigen::RowVector3d bx = dt * b_hat.row(3 * t);
      const Eigen::RowVector3d by = dt * b_hat.row(3 * t + 1);
      if (p_nom.x() > sc.x_max - cfg.obstacle_screen)
        add_row(cumulative_row(bx, j), -kInf, sc.x_max - p0.x(), true);
      if (p_nom.x() < sc.x_min + cfg.obstacle_screen)
        add_row(cumulative_row(-bx, j), -kInf, p0.x() - sc.x_min, true);
      if (p_nom.y() > sc.y_max - cfg.obstacle_screen)
        add_row(cumulative_row(by, j), -kInf, sc.y_max - p0.y(), true);
      if (p_nom.y() < sc.y_min + cfg.obstacle_screen)
        add_row(cumulative_row(-by, j), -kInf, p0.y() - sc.y_min, true);
    }

  const int m = static_cast<int>(rows.size());
  qb.prob.a.resize(m, nv);
  qb.prob.lower.resize(m);
  qb.prob.upper.resize(m);
  for (int i = 0; i < m; ++i) {
    qb.prob.a.row(i) = rows[i];
    qb.prob.lower[i] = lo[i];
    qb.prob.upper[i] = hi[i];
  }
  return qb;
}

// Objective value of the candidate inputs under a given QP, with the slack at
// the smallest feasible value for those inputs.
double qp_value(const QpBuild& qb, const Eigen::VectorXd& u_flat) {
  const int nv = static_cast<int>(qb.prob.p.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(nv);
  v.head(nv - 1) = u_flat;
  double s = 0.0;
  for (int row : qb.soft_rows) {
    const double lhs = qb.prob.a.row(row).head(nv - 1).dot(u_flat);
    s = std::max(s, lhs - qb.prob.upper[row]);
  }
  v[nv - 1] = s;
  return 0.5 * v.dot(qb.prob.p * v) + qb.prob.q.dot(v);
}

}  // namespace

MpcSolution solve_tm_mpc(const Output& y0, const Eigen::MatrixXd& b_hat, const Pose2& goal,
                         const Scenario& scenario, const MpcConfig& cfg,
                         const MpcSolution* warm_start) {
  const int held = y0.held();
  if (held < 0) throw Error("solve_tm_mpc: no held terminal");
  const int n_steps = cfg.horizon;
  const Eigen::VectorXd y0v = y0.vec();
  if (b_hat.rows() != y0v.size() || b_hat.cols() != 3)
    throw DimensionMismatch("solve_tm_mpc: model matrix shape");

  // warm start: shift the previous sequence by one, repeating the tail
  std::vector<Eigen::Vector3d> u_best(n_steps, Eigen::Vector3d::Zero());
  Eigen::Vector3d u_prev = Eigen::Vector3d::Zero();
  if (warm_start && static_cast<int>(warm_start->u_sequence.size()) == n_steps) {
    for (int j = 0; j + 1 < n_steps; ++j) u_best[j] = warm_start->u_sequence[j + 1].vec();
    u_best[n_steps - 1] = warm_start->u_sequence[n_steps - 1].vec();
    u_prev = warm_start->u_sequence[0].vec();
  }

  MpcSolution sol;
  bool solver_converged = true;
  Eigen::VectorXd wx = warm_start ? warm_start->admm_x : Eigen::VectorXd();
  Eigen::VectorXd wy;  // constraint layout changes between solves; rebuild duals

  QpSettings st;
  st.eps = cfg.solver_eps;
  st.max_iters = cfg.solver_max_iters;

  double slack = 0.0;
  for (int it = 0; it < cfg.scp_iterations; ++it) {
    const auto nominal = rollout(y0v, b_hat, u_best, cfg.dt);
    const QpBuild qb = build_qp(y0v, b_hat, held, goal, scenario, cfg, nominal, u_prev);
    const QpResult res = solve_qp(qb.prob, st, wx.size() ? &wx : nullptr, nullptr);
    solver_converged = res.converged;

    std::vector<Eigen::Vector3d> u_cand(n_steps);
    Eigen::VectorXd u_flat(3 * n_steps);
    for (int j = 0; j < n_steps; ++j) {
      Eigen::Vector3d uj = res.x.segment<3>(3 * j);
      for (int c = 0; c < 3; ++c) uj[c] = std::clamp(uj[c], -cfg.u_max[c], cfg.u_max[c]);
      u_cand[j] = uj;
      u_flat.segment<3>(3 * j) = uj;
    }
    Eigen::VectorXd best_flat(3 * n_steps);
    for (int j = 0; j < n_steps; ++j) best_flat.segment<3>(3 * j) = u_best[j];

    // monotone safeguard: accept the new iterate only if it does not worsen
    // the objective under the current linearization
    const double cand_val = qp_value(qb, u_flat);
    const double best_val = qp_value(qb, best_flat);
    if (cand_val <= best_val + 1e-12) {
      u_best = u_cand;
      sol.scp_costs.push_back(cand_val);
      wx = res.x;
    } else {
      sol.scp_costs.push_back(best_val);
    }
    double s_need = 0.0;
    for (int row : qb.soft_rows) {
      Eigen::VectorXd bf(3 * n_steps);
      for (int j = 0; j < n_steps; ++j) bf.segment<3>(3 * j) = u_best[j];
      s_need = std::max(s_need, qb.prob.a.row(row).head(3 * n_steps).dot(bf) -
                                    qb.prob.upper[row]);
    }
    slack = s_need;
  }

  sol.slack = slack;
  sol.u_sequence.clear();
  for (const auto& uj : u_best) sol.u_sequence.push_back(Twist2::from_vec(uj));
  sol.predicted_y = rollout(y0v, b_hat, u_best, cfg.dt);
  for (const auto& yk : sol.predicted_y)
    sol.constraint_margins.push_back(
        check_constraints(stacked_to_output(yk, y0.status), scenario));

  sol.cost = 0.0;
  Twist2 prev = Twist2::from_vec(u_prev);
  for (int j = 0; j < n_steps; ++j) {
    sol.cost += stage_cost(stacked_to_output(sol.predicted_y[j], y0.status),
                           sol.u_sequence[j], prev, goal, cfg);
    prev = sol.u_sequence[j];
  }
  sol.cost += terminal_cost(stacked_to_output(sol.predicted_y[n_steps], y0.status), goal, cfg);

  sol.admm_x = wx;
  if (slack > 1e-6)
    sol.status = SolveStatus::InfeasibleRelaxed;
  else if (!solver_converged)
    sol.status = SolveStatus::MaxIterations;
  else
    sol.status = SolveStatus::Optimal;
  return sol;
}

MpcSolution solve_tm_mpc(const Output& y0, const CompositeModel& model, const Pose2& goal,
                         const Scenario& scenario, const MpcConfig& cfg,
                         const MpcSolution* warm_start) {
  return solve_tm_mpc(y0, model.matrix(y0.vec()), goal, scenario, cfg, warm_start);
}

double stage_cost(const Output& y, const Twist2& u, const Twist2& u_prev, const Pose2& goal,
                  const MpcConfig& cfg) {
  const int held = y.held();
  if (held < 0) throw Error("stage_cost: no held terminal");
  const Eigen::Vector3d uv = u.vec();
  const Eigen::Vector3d du = uv - u_prev.vec();
  return d_beta(y.poses[held], goal, cfg.beta) + uv.dot(cfg.q.asDiagonal() * uv) +
         du.dot(cfg.q_delta.asDiagonal() * du);
}

double terminal_cost(const Output& y_n, const Pose2& goal, const MpcConfig& cfg) {
  const int held = y_n.held();
  if (held < 0) throw Error("terminal_cost: no held terminal");
  return cfg.terminal_weight * d_beta(y_n.poses[held], goal, cfg.beta);
}

Pose2 goal_from_receptacle(const Pose2& receptacle_pose, const Pose2& insertion_offset) {
  return receptacle_pose.compose(insertion_offset);
}

bool goal_reached(const Pose2& rho_h, const Pose2& rho_g, const MpcConfig& cfg) {
  return d_beta(rho_h, rho_g, cfg.beta) < cfg.goal_tol;
}

}  // namespace dlon
