#pragma once

#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlon/dataset.hpp"
#include "dlon/se2.hpp"

namespace dlon {

/// Planar rigid-body input matrix: per-terminal blocks
/// [1 0 (y_h - y_t); 0 1 (x_t - x_h); 0 0 1] stacked over terminals.
Eigen::MatrixXd rigid_body_matrix(const std::vector<Pose2>& terminal_poses, int held);
Eigen::MatrixXd rigid_body_matrix(const Eigen::VectorXd& y, int held);

/// Windowed local linear model ydot = B_ls u fit by ridge least squares over
/// the last N_e (ydot, u) pairs. The empty window yields B_ls = 0.
class LocalLinearModel {
 public:
  LocalLinearModel(int output_dim = 0, int capacity = 30, double ridge = 1e-6);

  void push(const Eigen::VectorXd& y_dot, const Eigen::Vector3d& u);
  void clear();
  int size() const { return static_cast<int>(window_.size()); }
  int capacity() const { return capacity_; }
  double ridge() const { return ridge_; }

  Eigen::MatrixXd fit() const;                // output_dim x 3
  Eigen::MatrixXd fit(double ridge) const;

 private:
  int output_dim_;
  int capacity_;
  double ridge_;
  std::deque<std::pair<Eigen::VectorXd, Eigen::Vector3d>> window_;
};

/// Adaptive blend B = alpha * B_rb(y) + (1 - alpha) * B_ls with geometric
/// discount alpha <- gamma * alpha from alpha = 1.
struct CompositeModel {
  double alpha = 1.0;
  double gamma = 0.9;
  int held = 0;
  LocalLinearModel local;
  Eigen::MatrixXd b_ls;  // last fit

  CompositeModel(int output_dim = 0, int held_terminal = 0, double gamma_ = 0.9,
                 int window = 30, double ridge = 1e-6);

  void reset(int held_terminal);
  void refit() { b_ls = local.fit(); }
  void discount() { alpha *= gamma; }
  Eigen::MatrixXd matrix(const Eigen::VectorXd& y) const;
};

struct ModelEvalRow {
  std::string model;
  double trans_mean = 0, trans_std = 0;
  double rot_mean = 0, rot_std = 0;
};

struct ModelEvalConfig {
  double fit_seconds = 1.0;      // N_e = fc * fit_seconds
  double horizon_seconds = 5.0;
  double gamma = 0.9;
  double ridge = 1e-6;
};

struct ModelEvalResult {
  std::vector<ModelEvalRow> rows;  // rigid, least-squares, composite
  // per-trajectory max errors, same order as rows
  std::vector<std::vector<double>> trans_errors;
  std::vector<std::vector<double>> rot_errors;
};

/// Fits B_ls on the first second of each trajectory, rolls each model out
/// over the following horizon and reports max pose error statistics.
ModelEvalResult evaluate_models(const Dataset& ds, const ModelEvalConfig& cfg = {});

std::string eval_table_csv(const ModelEvalResult& r);

}  // namespace dlon
