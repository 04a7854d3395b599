#include "dlon/planner.hpp"

#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

#include "dlon/errors.hpp"

namespace dlon {

std::optional<int> select_terminal(const Output& y, const Scenario& scenario) {
  std::optional<int> best;
  double best_margin = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < y.size(); ++t) {
    if (y.status[t] != TerminalStatus::Free) continue;
    if (!scenario.in_workspace(y.poses[t])) continue;
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& o : scenario.obstacles)
      worst = std::max(worst, scenario.safety_radius(o) -
                                  (y.poses[t].position() - o.center).norm());
    if (worst >= 0.0) continue;  // in violation: not graspable
    if (!best.has_value() || worst > best_margin) {
      best_margin = worst;
      best = t;
    }
  }
  return best;
}

namespace {

double max_margin(const Output& y, const Scenario& sc) {
  const Eigen::VectorXd c = check_constraints(y, sc);
  return c.size() ? c.maxCoeff() : 0.0;
}

}  // namespace

InstallResult install_dlon(const SimState& init, const DlonTopology& topo,
                           const Scenario& scenario, const MpcConfig& mpc_cfg,
                           const ModelConfig& model_cfg, ModelKind kind,
                           const SimParams& params, EventSink sink) {
  const auto wall_start = std::chrono::steady_clock::now();
  const int nt = topo.terminal_count();
  const int substeps = static_cast<int>(std::round(params.fs * mpc_cfg.dt));

  InstallResult out;
  SimState state = settle(init, topo, 1.0, params);  // settled observation for SELECT
  double sim_time = 1.0;
  std::vector<int> retries(nt, 0);
  bool aborted = false;

  while (!aborted) {
    const Output y_sel = observe(state, topo);
    const auto picked = select_terminal(y_sel, scenario);
    if (!picked) break;  // no feasible TMs remaining
    const int t = *picked;

    state = grasp(state, topo, t, scenario);
    const Pose2 goal = scenario.goal(t);

    CompositeModel cm(3 * nt, t, model_cfg.gamma, model_cfg.window, model_cfg.ridge);
    TmRecord rec;
    rec.terminal = t;
    rec.max_c = -std::numeric_limits<double>::infinity();
    MpcSolution warm;
    bool have_warm = false;
    std::deque<Eigen::VectorXd> y_hist;  // raw control-rate observations
    Twist2 u_last;

    for (int k = 0; k < mpc_cfg.max_tm_steps; ++k) {
      const Output y_k = observe(state, topo);
      rec.max_c = std::max(rec.max_c, max_margin(y_k, scenario));
      if (goal_reached(y_k.poses[t], goal, mpc_cfg)) {
        rec.goal_reached = true;
        break;
      }

      Eigen::MatrixXd b_hat;
      if (kind == ModelKind::Composite) {
        cm.refit();
        b_hat = cm.matrix(y_k.vec());
      } else {
        b_hat = rigid_body_matrix(y_k.vec(), t);
      }
      const MpcSolution sol = solve_tm_mpc(y_k, b_hat, goal, scenario, mpc_cfg,
                                           have_warm ? &warm : nullptr);
      const Twist2 u0 = sol.u_sequence.front();
      const double dt_sim = 1.0 / params.fs;
      for (int i = 0; i < substeps; ++i) state = step(state, topo, u0, dt_sim, params);
      ++rec.steps_used;
      sim_time += mpc_cfg.dt;
      if (sink) sink({sim_time, t, y_k.vec(), u0, max_margin(y_k, scenario), cm.alpha});

      cm.discount();
      // causal rate estimate: 2-sample moving average, backward difference,
      // paired with the input that drove the interval
      y_hist.push_back(y_k.vec());
      if (y_hist.size() > 3) y_hist.pop_front();
      if (y_hist.size() == 3) {
        const int dim = static_cast<int>(y_hist[0].size());
        Eigen::VectorXd rate(dim);
        for (int c = 0; c < dim; ++c) {
          if (c % 3 == 2)
            rate[c] = normalize_angle(y_hist[2][c] - y_hist[0][c]) / (2.0 * mpc_cfg.dt);
          else
            rate[c] = (y_hist[2][c] - y_hist[0][c]) / (2.0 * mpc_cfg.dt);
        }
        cm.local.push(rate, u_last.vec());
      }
      u_last = u0;
      warm = sol;
      have_warm = true;
    }

    rec.final_c = max_margin(observe(state, topo), scenario);
    if (rec.goal_reached) {
      state = mate(state, topo, t, goal, mpc_cfg.beta, mpc_cfg.goal_tol);
      rec.final_c = max_margin(observe(state, topo), scenario);
    } else {
      state = release(state);
      if (++retries[t] > 2) aborted = true;  // repeated TM failure: give up
    }
    out.report.tms.push_back(rec);

    state = settle(state, topo, 1.0, params);  // re-grasp pause between TMs
    sim_time += 1.0;
  }

  bool all_mated = true;
  for (int t = 0; t < nt; ++t)
    if (state.terminal_status[t] != TerminalStatus::Mated) all_mated = false;
  out.report.success = all_mated;
  out.report.total_wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  out.final_state = state;
  return out;
}

}  // namespace dlon
