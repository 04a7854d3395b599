#pragma once

#include <Eigen/Core>

namespace dlon {

/// Convex QP: minimize 0.5 x'Px + q'x subject to lower <= Ax <= upper.
struct QpProblem {
  Eigen::MatrixXd p;
  Eigen::VectorXd q;
  Eigen::MatrixXd a;
  Eigen::VectorXd lower, upper;
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double eps = 1e-8;    // primal/dual residual tolerance (infinity norm)
  int max_iters = 4000;
  int check_every = 10;
};

struct QpResult {
  Eigen::VectorXd x;
  Eigen::VectorXd z;  // constraint-space iterate
  Eigen::VectorXd y;  // dual
  bool converged = false;
  int iters = 0;
  double objective = 0.0;
};

/// Operator-splitting (ADMM) solver with a single factorization per call.
/// Warm starts accept the previous primal/dual pair.
QpResult solve_qp(const QpProblem& prob, const QpSettings& settings = {},
                  const Eigen::VectorXd* warm_x = nullptr,
                  const Eigen::VectorXd* warm_y = nullptr);

}  // namespace dlon
