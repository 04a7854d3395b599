#include "dlon/sysid.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "dlon/errors.hpp"

using nlohmann::json;

namespace dlon {

PolyLibrary PolyLibrary::poly(int n_y, int n_u, int degree) {
  if (degree < 0 || degree > 2) throw Error("library: degree must be 0, 1 or 2");
  PolyLibrary lib;
  lib.n_y = n_y;
  lib.n_u = n_u;
  lib.degree = degree;
  lib.terms.push_back({});  // constant
  const int v = n_y + n_u;
  if (degree >= 1)
    for (int i = 0; i < v; ++i) lib.terms.push_back({i, -1});
  if (degree >= 2)
    for (int i = 0; i < v; ++i)
      for (int j = i; j < v; ++j) lib.terms.push_back({i, j});
  return lib;
}

std::string PolyLibrary::var_name(int v) const {
  static const char* uc[3] = {"u_vx", "u_vy", "u_w"};
  static const char* yc[3] = {"x", "y", "th"};
  if (v < n_y) return "t" + std::to_string(v / 3) + "_" + yc[v % 3];
  return uc[(v - n_y) % 3];
}

std::string PolyLibrary::term_name(int k) const {
  const Monomial& m = terms.at(k);
  if (m.degree() == 0) return "1";
  if (m.degree() == 1) return var_name(m.i);
  if (m.i == m.j) return var_name(m.i) + "^2";
  return var_name(m.i) + "*" + var_name(m.j);
}

Eigen::VectorXd PolyLibrary::eval(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const {
  if (y.size() != n_y || u.size() != n_u)
    throw DimensionMismatch("build_features: input sizes do not match the library");
  Eigen::VectorXd z(n_vars());
  z << y, u;
  Eigen::VectorXd out(size());
  for (int k = 0; k < size(); ++k) out[k] = terms[k].eval(z);
  return out;
}

int PolyLibrary::find(const Monomial& m) const {
  for (int k = 0; k < size(); ++k)
    if (terms[k].i == m.i && terms[k].j == m.j) return k;
  return -1;
}

Eigen::VectorXd PolyModel::predict(const Eigen::VectorXd& y, const Eigen::VectorXd& u) const {
  return coeffs.transpose() * library.eval(y, u);
}

int SparseModel::nonzero_count() const {
  int n = 0;
  for (int k = 0; k < xi_normalized.rows(); ++k)
    for (int d = 0; d < xi_normalized.cols(); ++d)
      if (xi_normalized(k, d) != 0.0) ++n;
  return n;
}

void build_regression(const Dataset& ds, const PolyLibrary& lib, Eigen::MatrixXd& features,
                      Eigen::MatrixXd& targets) {
  int rows = 0;
  for (const auto& tr : ds.trajectories) rows += tr.size();
  features.resize(rows, lib.size());
  targets.resize(rows, lib.n_y);
  int r = 0;
  for (const auto& tr : ds.trajectories)
    for (int k = 0; k < tr.size(); ++k, ++r) {
      features.row(r) = lib.eval(tr.y_vec(k), tr.samples[k].u.vec()).transpose();
      targets.row(r) = tr.y_dot_vec(k).transpose();
    }
}

SparseModel stlsq(const PolyLibrary& lib, const Eigen::MatrixXd& features,
                  const Eigen::MatrixXd& targets, double lambda, double threshold) {
  const int rows = static_cast<int>(features.rows());
  const int nf = static_cast<int>(features.cols());
  const int nd = static_cast<int>(targets.cols());
  if (nf != lib.size()) throw DimensionMismatch("stlsq: feature count != library size");
  if (targets.rows() != rows) throw DimensionMismatch("stlsq: row mismatch");
  if (rows < nf) throw Error("stlsq: fewer samples than library terms");

  SparseModel m;
  m.raw.library = lib;
  m.lambda = lambda;
  m.threshold = threshold;
  m.feature_mean = Eigen::VectorXd::Zero(nf);
  m.feature_scale = Eigen::VectorXd::Ones(nf);
  m.target_mean = Eigen::VectorXd::Zero(nd);
  m.target_scale = Eigen::VectorXd::Ones(nd);

  // z-score all columns except the constant term
  Eigen::MatrixXd fn = features;
  for (int k = 0; k < nf; ++k) {
    if (lib.terms[k].degree() == 0) continue;
    const double mean = features.col(k).mean();
    double var = (features.col(k).array() - mean).square().sum() / rows;
    const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    m.feature_mean[k] = mean;
    m.feature_scale[k] = scale;
    fn.col(k) = (features.col(k).array() - mean) / scale;
  }
  Eigen::MatrixXd tn = targets;
  for (int d = 0; d < nd; ++d) {
    const double mean = targets.col(d).mean();
    double var = (targets.col(d).array() - mean).square().sum() / rows;
    const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
    m.target_mean[d] = mean;
    m.target_scale[d] = scale;
    tn.col(d) = (targets.col(d).array() - mean) / scale;
  }

  const Eigen::MatrixXd gram = fn.transpose() * fn;
  const Eigen::MatrixXd moment = fn.transpose() * tn;

  m.xi_normalized = Eigen::MatrixXd::Zero(nf, nd);
  for (int d = 0; d < nd; ++d) {
    std::vector<int> support(nf);
    for (int k = 0; k < nf; ++k) support[k] = k;
    Eigen::VectorXd xi;
    for (int iter = 0; iter < 64; ++iter) {
      const int ns = static_cast<int>(support.size());
      if (ns == 0) break;
      Eigen::MatrixXd g(ns, ns);
      Eigen::VectorXd b(ns);
      for (int a = 0; a < ns; ++a) {
        b[a] = moment(support[a], d);
        for (int c = 0; c < ns; ++c) g(a, c) = gram(support[a], support[c]);
        g(a, a) += lambda;
      }
      xi = g.ldlt().solve(b);
      std::vector<int> keep;
      for (int a = 0; a < ns; ++a)
        if (std::abs(xi[a]) >= threshold) keep.push_back(support[a]);
      if (keep.size() == support.size()) break;  // fixed point
      support = std::move(keep);
    }
    if (support.empty()) {
      m.zero_output_dims.push_back(d);  // rank-deficient: zero function for this dim
      continue;
    }
    for (size_t a = 0; a < support.size(); ++a) m.xi_normalized(support[a], d) = xi[a];
  }

  // Un-normalize into the raw view; the constant term absorbs the means:
  // yhat = mu_t + sigma_t * sum_k xi_k (f_k - mu_k) / sigma_k.
  m.raw.coeffs = Eigen::MatrixXd::Zero(nf, nd);
  const int const_idx = lib.find(Monomial{});
  if (const_idx < 0) throw MissingRigidTerms("stlsq: library must contain the constant term");
  for (int d = 0; d < nd; ++d) {
    double c0 = m.target_mean[d] + m.xi_normalized(const_idx, d) * m.target_scale[d];
    for (int k = 0; k < nf; ++k) {
      if (k == const_idx) continue;
      const double xi = m.xi_normalized(k, d);
      if (xi == 0.0) continue;
      const double w = xi * m.target_scale[d] / m.feature_scale[k];
      m.raw.coeffs(k, d) = w;
      c0 -= w * m.feature_mean[k];
    }
    m.raw.coeffs(const_idx, d) = c0;
  }
  return m;
}

RigidDecomposition decompose_rigid_residual(const PolyModel& model, int held_index) {
  const PolyLibrary& lib = model.library;
  const int nt = lib.n_y / 3;
  if (lib.n_y % 3 != 0 || held_index < 0 || held_index >= nt)
    throw DimensionMismatch("decompose: outputs must stack SE(2) poses");
  const int u_vx = lib.n_y + 0, u_vy = lib.n_y + 1, u_w = lib.n_y + 2;
  auto pair_term = [&](int a, int b) {
    return a <= b ? Monomial{a, b} : Monomial{b, a};
  };

  RigidDecomposition out;
  out.c_diag = Eigen::VectorXd::Zero(3 * nt);
  out.residual = model;

  for (int t = 0; t < nt; ++t)
    for (int ch = 0; ch < 3; ++ch) {
      const int d = 3 * t + ch;
      // rigid-body predictor pattern for this output dimension
      std::vector<std::pair<int, double>> pattern;  // (library term, weight)
      auto add = [&](const Monomial& mono, double w) {
        const int k = lib.find(mono);
        if (k < 0) throw MissingRigidTerms("decompose: library lacks rigid-body terms");
        pattern.push_back({k, w});
      };
      if (ch == 0) {
        add(Monomial{u_vx, -1}, 1.0);
        if (t != held_index) {
          add(pair_term(3 * held_index + 1, u_w), 1.0);  // + y_h * w
          add(pair_term(3 * t + 1, u_w), -1.0);          // - y_t * w
        }
      } else if (ch == 1) {
        add(Monomial{u_vy, -1}, 1.0);
        if (t != held_index) {
          add(pair_term(3 * t + 0, u_w), 1.0);           // + x_t * w
          add(pair_term(3 * held_index + 0, u_w), -1.0); // - x_h * w
        }
      } else {
        add(Monomial{u_w, -1}, 1.0);
      }
      double num = 0.0, den = 0.0;
      for (const auto& [k, w] : pattern) {
        num += w * model.coeffs(k, d);
        den += w * w;
      }
      const double c = num / den;
      out.c_diag[d] = c;
      for (const auto& [k, w] : pattern) out.residual.coeffs(k, d) -= c * w;
    }
  return out;
}

R2Result r_squared(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& actuals,
                   const std::vector<int>& channel_group) {
  if (predictions.rows() != actuals.rows() || predictions.cols() != actuals.cols())
    throw DimensionMismatch("r_squared: shape mismatch");
  if (actuals.rows() < 2) throw Error("r_squared: need at least 2 samples");
  const int nd = static_cast<int>(actuals.cols());
  R2Result r;
  r.per_dim.resize(nd);
  double tsum = 0, rsum = 0;
  int tcount = 0, rcount = 0;
  for (int d = 0; d < nd; ++d) {
    const double mean = actuals.col(d).mean();
    const double ss_tot = (actuals.col(d).array() - mean).square().sum();
    if (ss_tot < 1e-18) throw DegenerateVariance("r_squared: constant actuals in dim " +
                                                 std::to_string(d));
    const double ss_res = (actuals.col(d) - predictions.col(d)).squaredNorm();
    r.per_dim[d] = 1.0 - ss_res / ss_tot;
    const int g = d < static_cast<int>(channel_group.size()) ? channel_group[d] : -1;
    if (g == 0) { tsum += r.per_dim[d]; ++tcount; }
    if (g == 1) { rsum += r.per_dim[d]; ++rcount; }
  }
  r.translational_mean = tcount ? tsum / tcount : 0.0;
  r.rotational_mean = rcount ? rsum / rcount : 0.0;
  return r;
}

std::vector<Eigen::VectorXd> simulate_model(const PolyModel& model, const Eigen::VectorXd& y0,
                                            const std::vector<Eigen::VectorXd>& u_series,
                                            double dt) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(u_series.size() + 1);
  out.push_back(y0);
  Eigen::VectorXd y = y0;
  for (const auto& u : u_series) {
    y = y + dt * model.predict(y, u);
    out.push_back(y);
  }
  return out;
}

void save_model(const SparseModel& m, const std::string& path) {
  json j;
  j["lambda"] = m.lambda;
  j["threshold"] = m.threshold;
  j["library"] = {{"n_y", m.library().n_y}, {"n_u", m.library().n_u},
                  {"degree", m.library().degree}};
  j["zero_output_dims"] = m.zero_output_dims;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["feature_mean"] = vec(m.feature_mean);
  j["feature_scale"] = vec(m.feature_scale);
  j["target_mean"] = vec(m.target_mean);
  j["target_scale"] = vec(m.target_scale);
  json terms = json::array();
  for (int d = 0; d < m.xi_normalized.cols(); ++d) {
    json dim = json::array();
    for (int k = 0; k < m.xi_normalized.rows(); ++k)
      if (m.xi_normalized(k, d) != 0.0)
        dim.push_back({{"term", m.library().term_name(k)}, {"index", k},
                       {"coefficient", m.xi_normalized(k, d)},
                       {"raw_coefficient", m.raw.coeffs(k, d)}});
    terms.push_back(dim);
  }
  j["dimensions"] = terms;
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << "\n";
}

SparseModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  json j = json::parse(f);
  SparseModel m;
  m.lambda = j.at("lambda");
  m.threshold = j.at("threshold");
  m.raw.library = PolyLibrary::poly(j["library"].at("n_y"), j["library"].at("n_u"),
                                    j["library"].at("degree"));
  m.zero_output_dims = j.at("zero_output_dims").get<std::vector<int>>();
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()).eval();
  };
  m.feature_mean = vec("feature_mean");
  m.feature_scale = vec("feature_scale");
  m.target_mean = vec("target_mean");
  m.target_scale = vec("target_scale");
  const int nf = m.library().size();
  const int nd = static_cast<int>(j.at("dimensions").size());
  m.xi_normalized = Eigen::MatrixXd::Zero(nf, nd);
  m.raw.coeffs = Eigen::MatrixXd::Zero(nf, nd);
  for (int d = 0; d < nd; ++d)
    for (const auto& e : j["dimensions"][d]) {
      const int k = e.at("index");
      m.xi_normalized(k, d) = e.at("coefficient");
      m.raw.coeffs(k, d) = e.at("raw_coefficient");
    }
  // reconstruct the constant offsets that carry no normalized coefficient
  const int const_idx = m.library().find(Monomial{});
  for (int d = 0; d < nd; ++d) {
    double c0 = m.target_mean[d];
    for (int k = 0; k < nf; ++k) {
      if (m.xi_normalized(k, d) == 0.0 || k == const_idx) continue;
      c0 -= m.xi_normalized(k, d) * m.target_scale[d] / m.feature_scale[k] *
            m.feature_mean[k];
    }
    if (const_idx >= 0 && m.xi_normalized(const_idx, d) == 0.0)
      m.raw.coeffs(const_idx, d) = c0;
  }
  return m;
}

std::string equation_dump(const SparseModel& m) {
  std::ostringstream os;
  const auto& lib = m.library();
  for (int d = 0; d < m.raw.coeffs.cols(); ++d) {
    os << "d/dt " << lib.var_name(d) << " =";
    bool any = false;
    for (int k = 0; k < lib.size(); ++k) {
      const double c = m.raw.coeffs(k, d);
      if (c == 0.0) continue;
      char buf[64];
      std::snprintf(buf, sizeof buf, " %+.6g", c);
      os << buf;
      if (lib.terms[k].degree() > 0) os << "*" << lib.term_name(k);
      any = true;
    }
    if (!any) os << " 0";
    os << "\n";
  }
  return os.str();
}

}  // namespace dlon
