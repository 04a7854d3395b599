#include "dlon/qp.hpp"

#include <algorithm>

#include <Eigen/Dense>

#include "dlon/errors.hpp"

namespace dlon {

QpResult solve_qp(const QpProblem& prob, const QpSettings& st, const Eigen::VectorXd* warm_x,
                  const Eigen::VectorXd* warm_y) {
  const int n = static_cast<int>(prob.p.rows());
  const int m = static_cast<int>(prob.a.rows());
  if (prob.q.size() != n || (m > 0 && prob.a.cols() != n) || prob.lower.size() != m ||
      prob.upper.size() != m)
    throw DimensionMismatch("solve_qp: inconsistent problem sizes");

  QpResult r;
  r.x = warm_x && warm_x->size() == n ? *warm_x : Eigen::VectorXd::Zero(n);
  r.y = warm_y && warm_y->size() == m ? *warm_y : Eigen::VectorXd::Zero(m);
  r.z = m > 0 ? (prob.a * r.x).eval() : Eigen::VectorXd();
  for (int i = 0; i < m; ++i) r.z[i] = std::clamp(r.z[i], prob.lower[i], prob.upper[i]);

  Eigen::MatrixXd kkt = prob.p;
  kkt.diagonal().array() += st.sigma;
  if (m > 0) kkt += st.rho * prob.a.transpose() * prob.a;
  const Eigen::LDLT<Eigen::MatrixXd> fact(kkt);
  if (fact.info() != Eigen::Success) throw SolverDiverged("solve_qp: factorization failed");

  for (r.iters = 1; r.iters <= st.max_iters; ++r.iters) {
    Eigen::VectorXd rhs = st.sigma * r.x - prob.q;
    if (m > 0) rhs += prob.a.transpose() * (st.rho * r.z - r.y);
    r.x = fact.solve(rhs);
    if (m > 0) {
      const Eigen::VectorXd ax = prob.a * r.x;
      r.z = ax + r.y / st.rho;
      for (int i = 0; i < m; ++i) r.z[i] = std::clamp(r.z[i], prob.lower[i], prob.upper[i]);
      r.y += st.rho * (ax - r.z);
      if (r.iters % st.check_every == 0) {
        const double prim = (ax - r.z).cwiseAbs().maxCoeff();
        const double dual =
            (prob.p * r.x + prob.q + prob.a.transpose() * r.y).cwiseAbs().maxCoeff();
        if (prim < st.eps && dual < st.eps) {
          r.converged = true;
          break;
        }
      }
    } else if (r.iters % st.check_every == 0) {
      const double dual = (prob.p * r.x + prob.q).cwiseAbs().maxCoeff();
      if (dual < st.eps) {
        r.converged = true;
        break;
      }
    }
  }
  r.objective = 0.5 * r.x.dot(prob.p * r.x) + prob.q.dot(r.x);
  return r;
}

}  // namespace dlon
