#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "dlon/dataset.hpp"

namespace dlon {

/// One monomial over the stacked variables z = [y..., u...]: the product of
/// up to two variables (degree <= 2), or the constant term.
struct Monomial {
  int i = -1;  // first factor, -1 for none
  int j = -1;  // second factor, -1 for none (requires i <= j when both set)

  int degree() const { return (i >= 0) + (j >= 0); }
  double eval(const Eigen::VectorXd& z) const {
    double v = 1.0;
    if (i >= 0) v *= z[i];
    if (j >= 0) v *= z[j];
    return v;
  }
};

/// Polynomial candidate library over (y, u) with the constant term included.
/// Term order is deterministic: total degree ascending, then lexicographic.
struct PolyLibrary {
  int n_y = 0;
  int n_u = 0;
  int degree = 2;
  std::vector<Monomial> terms;

  static PolyLibrary poly(int n_y, int n_u, int degree = 2);

  int n_vars() const { return n_y + n_u; }
  int size() const { return static_cast<int>(terms.size()); }
  std::string term_name(int k) const;  // e.g. "1", "t1_y", "t0_x*u_w"
  std::string var_name(int v) const;

  /// build_features: evaluates every monomial in library order.
  Eigen::VectorXd eval(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const;
  int find(const Monomial& m) const;  // -1 when absent
};

/// Raw-space polynomial model ydot = coeffs^T theta(y, u).
struct PolyModel {
  PolyLibrary library;
  Eigen::MatrixXd coeffs;  // library terms x output dims

  Eigen::VectorXd predict(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const;
};

/// STLSQ fit: internals are z-scored, so the stored coefficient matrix obeys
/// min |nonzero| >= threshold in normalized space; `raw` carries the
/// un-normalized view used for prediction and inspection.
struct SparseModel {
  PolyModel raw;
  Eigen::MatrixXd xi_normalized;  // terms x output dims
  Eigen::VectorXd feature_mean, feature_scale;
  Eigen::VectorXd target_mean, target_scale;
  double lambda = 0.0;
  double threshold = 0.0;
  std::vector<int> zero_output_dims;  // dims whose support emptied (reported, not fatal)

  const PolyLibrary& library() const { return raw.library; }
  Eigen::VectorXd predict(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const {
    return raw.predict(y, u);
  }
  int nonzero_count() const;
};

/// Stacks library features (rows) and ydot targets for every sample.
void build_regression(const Dataset& ds, const PolyLibrary& lib, Eigen::MatrixXd& features,
                      Eigen::MatrixXd& targets);

/// Sequentially-thresholded ridge regression per output dimension.
SparseModel stlsq(const PolyLibrary& lib, const Eigen::MatrixXd& features,
                  const Eigen::MatrixXd& targets, double lambda, double threshold);

struct RigidDecomposition {
  Eigen::VectorXd c_diag;  // one gain per output dimension
  PolyModel residual;
};

/// Splits a polynomial model into C * f_rb + f_res by least-squares matching
/// of each output dimension's rigid-body monomial pattern. Reconstruction is
/// exact by construction.
RigidDecomposition decompose_rigid_residual(const PolyModel& model, int held_index);

struct R2Result {
  Eigen::VectorXd per_dim;
  double translational_mean = 0.0;
  double rotational_mean = 0.0;
};

/// Coefficient of determination per dimension; channel_group assigns each
/// dimension 0 (translational), 1 (rotational) or -1 (excluded from means).
R2Result r_squared(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& actuals,
                   const std::vector<int>& channel_group);

/// ZOH rollout y_{k+1} = y_k + dt * f(y_k, u_k).
std::vector<Eigen::VectorXd> simulate_model(const PolyModel& model, const Eigen::VectorXd& y0,
                                            const std::vector<Eigen::VectorXd>& u_series,
                                            double dt);

void save_model(const SparseModel& m, const std::string& path);
SparseModel load_model(const std::string& path);

/// Human-readable equation dump, one line per output dimension.
std::string equation_dump(const SparseModel& m);

}  // namespace dlon
