#include "dlon/models.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "dlon/errors.hpp"

namespace dlon {

Eigen::MatrixXd rigid_body_matrix(const std::vector<Pose2>& terminal_poses, int held) {
  const int nt = static_cast<int>(terminal_poses.size());
  if (held < 0 || held >= nt) throw DimensionMismatch("rigid_body_matrix: bad held index");
  const Pose2& h = terminal_poses[held];
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(3 * nt, 3);
  for (int t = 0; t < nt; ++t) {
    b(3 * t + 0, 0) = 1.0;
    b(3 * t + 0, 2) = h.y - terminal_poses[t].y;
    b(3 * t + 1, 1) = 1.0;
    b(3 * t + 1, 2) = terminal_poses[t].x - h.x;
    b(3 * t + 2, 2) = 1.0;
  }
  return b;
}

Eigen::MatrixXd rigid_body_matrix(const Eigen::VectorXd& y, int held) {
  if (y.size() % 3 != 0) throw DimensionMismatch("rigid_body_matrix: y must stack poses");
  std::vector<Pose2> poses;
  for (int t = 0; t < y.size() / 3; ++t)
    poses.push_back(Pose2(y[3 * t], y[3 * t + 1], y[3 * t + 2]));
  return rigid_body_matrix(poses, held);
}

LocalLinearModel::LocalLinearModel(int output_dim, int capacity, double ridge)
    : output_dim_(output_dim), capacity_(capacity), ridge_(ridge) {}

void LocalLinearModel::push(const Eigen::VectorXd& y_dot, const Eigen::Vector3d& u) {
  if (y_dot.size() != output_dim_) throw DimensionMismatch("local model: y_dot size");
  window_.push_back({y_dot, u});
  while (static_cast<int>(window_.size()) > capacity_) window_.pop_front();
}

void LocalLinearModel::clear() { window_.clear(); }

Eigen::MatrixXd LocalLinearModel::fit() const { return fit(ridge_); }

Eigen::MatrixXd LocalLinearModel::fit(double ridge) const {
  Eigen::Matrix3d gram = ridge * Eigen::Matrix3d::Identity();
  Eigen::MatrixXd moment = Eigen::MatrixXd::Zero(output_dim_, 3);
  for (const auto& [yd, u] : window_) {
    gram += u * u.transpose();
    moment += yd * u.transpose();
  }
  return moment * gram.ldlt().solve(Eigen::Matrix3d::Identity());
}

CompositeModel::CompositeModel(int output_dim, int held_terminal, double gamma_, int window,
                               double ridge)
    : alpha(1.0), gamma(gamma_), held(held_terminal), local(output_dim, window, ridge),
      b_ls(Eigen::MatrixXd::Zero(output_dim, 3)) {}

void CompositeModel::reset(int held_terminal) {
  alpha = 1.0;
  held = held_terminal;
  local.clear();
  b_ls.setZero();
}

Eigen::MatrixXd CompositeModel::matrix(const Eigen::VectorXd& y) const {
  return alpha * rigid_body_matrix(y, held) + (1.0 - alpha) * b_ls;
}

namespace {

struct MaxErrors {
  double trans = 0;
  double rot = 0;
};

// Rollout the model matrix provider over the horizon; returns max pose errors
// against the recorded trajectory.
template <typename MatrixAt>
MaxErrors rollout_errors(const Trajectory& tr, int start, int horizon, double dt,
                         MatrixAt&& matrix_at) {
  const int nt = static_cast<int>(tr.samples[0].y.size());
  Eigen::VectorXd y = tr.y_vec(start);
  MaxErrors e;
  for (int k = 0; k < horizon; ++k) {
    const Eigen::VectorXd u = tr.samples[start + k].u.vec();
    y = y + dt * (matrix_at(y, k) * u);
    const Eigen::VectorXd truth = tr.y_vec(start + k + 1);
    for (int t = 0; t < nt; ++t) {
      e.trans = std::max(e.trans, (y.segment<2>(3 * t) - truth.segment<2>(3 * t)).norm());
      e.rot = std::max(e.rot, std::abs(normalize_angle(y[3 * t + 2] - truth[3 * t + 2])));
    }
  }
  return e;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0;
  for (double x : v) mean += x;
  mean /= v.size();
  double var = 0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / v.size())};
}

}  // namespace

ModelEvalResult evaluate_models(const Dataset& ds, const ModelEvalConfig& cfg) {
  const double fc = ds.meta.fc;
  const double dt = 1.0 / fc;
  const int fit_n = static_cast<int>(std::round(cfg.fit_seconds * fc));
  const int horizon = static_cast<int>(std::round(cfg.horizon_seconds * fc));
  const int held = ds.meta.held_terminal;

  ModelEvalResult res;
  res.trans_errors.assign(3, {});
  res.rot_errors.assign(3, {});

  for (const auto& tr : ds.trajectories) {
    if (tr.size() < fit_n + horizon + 1)
      throw TrajectoryTooShort("evaluate_models: trajectory shorter than fit + horizon");
    const int nd = 3 * static_cast<int>(tr.samples[0].y.size());

    LocalLinearModel local(nd, fit_n, cfg.ridge);
    for (int k = 0; k < fit_n; ++k) local.push(tr.y_dot_vec(k), tr.samples[k].u.vec());
    const Eigen::MatrixXd b_ls = local.fit();

    const auto rigid = rollout_errors(tr, fit_n, horizon, dt, [&](const Eigen::VectorXd& y, int) {
      return rigid_body_matrix(y, held);
    });
    const auto ls = rollout_errors(tr, fit_n, horizon, dt, [&](const Eigen::VectorXd&, int) {
      return b_ls;
    });
    // Composite: the per-TM schedule restarted at prediction time
    // (alpha_0 = 1, discounted every step).
    const auto comp = rollout_errors(tr, fit_n, horizon, dt, [&](const Eigen::VectorXd& y, int k) {
      const double alpha = std::pow(cfg.gamma, k);
      return (alpha * rigid_body_matrix(y, held) + (1.0 - alpha) * b_ls).eval();
    });

    res.trans_errors[0].push_back(rigid.trans);
    res.rot_errors[0].push_back(rigid.rot);
    res.trans_errors[1].push_back(ls.trans);
    res.rot_errors[1].push_back(ls.rot);
    res.trans_errors[2].push_back(comp.trans);
    res.rot_errors[2].push_back(comp.rot);
  }

  const char* names[3] = {"rigid_body", "least_squares", "composite"};
  for (int i = 0; i < 3; ++i) {
    ModelEvalRow row;
    row.model = names[i];
    std::tie(row.trans_mean, row.trans_std) = mean_std(res.trans_errors[i]);
    std::tie(row.rot_mean, row.rot_std) = mean_std(res.rot_errors[i]);
    res.rows.push_back(row);
  }
  return res;
}

std::string eval_table_csv(const ModelEvalResult& r) {
  std::ostringstream os;
  os << "model,translational_error_mean_m,translational_error_std_m,"
        "rotational_error_mean_rad,rotational_error_std_rad\n";
  char buf[160];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6g,%.6g,%.6g,%.6g\n", row.model.c_str(),
                  row.trans_mean, row.trans_std, row.rot_mean, row.rot_std);
    os << buf;
  }
  return os.str();
}

}  // namespace dlon
