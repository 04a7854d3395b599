#include "dlon/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "dlon/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dlon {

Eigen::VectorXd Trajectory::y_vec(int k) const {
  const auto& s = samples.at(k);
  Eigen::VectorXd v(3 * s.y.size());
  for (size_t t = 0; t < s.y.size(); ++t) v.segment<3>(3 * t) = s.y[t].vec();
  return v;
}

Eigen::VectorXd Trajectory::y_dot_vec(int k) const {
  const auto& s = samples.at(k);
  Eigen::VectorXd v(3 * s.y_dot.size());
  for (size_t t = 0; t < s.y_dot.size(); ++t) v.segment<3>(3 * t) = s.y_dot[t].vec();
  return v;
}

namespace {

bool sample_equal(const TrajectorySample& a, const TrajectorySample& b) {
  if (a.t != b.t || a.y.size() != b.y.size()) return false;
  if (a.u.vx != b.u.vx || a.u.vy != b.u.vy || a.u.omega != b.u.omega) return false;
  for (size_t i = 0; i < a.y.size(); ++i) {
    if (a.y[i].x != b.y[i].x || a.y[i].y != b.y[i].y || a.y[i].theta != b.y[i].theta)
      return false;
    if (a.y_dot[i].vx != b.y_dot[i].vx || a.y_dot[i].vy != b.y_dot[i].vy ||
        a.y_dot[i].omega != b.y_dot[i].omega)
      return false;
  }
  return true;
}

}  // namespace

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.meta.fs != b.meta.fs || a.meta.fc != b.meta.fc || a.meta.seed != b.meta.seed ||
      a.meta.topology_hash != b.meta.topology_hash ||
      a.meta.n_terminals != b.meta.n_terminals ||
      a.meta.held_terminal != b.meta.held_terminal ||
      a.meta.samples_per_trajectory != b.meta.samples_per_trajectory)
    return false;
  if (a.trajectories.size() != b.trajectories.size()) return false;
  for (size_t i = 0; i < a.trajectories.size(); ++i) {
    if (a.trajectories[i].size() != b.trajectories[i].size()) return false;
    for (int k = 0; k < a.trajectories[i].size(); ++k)
      if (!sample_equal(a.trajectories[i].samples[k], b.trajectories[i].samples[k]))
        return false;
  }
  return true;
}

Dataset make_dataset(const DatasetMeta& meta, std::vector<Trajectory> trajectories) {
  Dataset ds;
  ds.meta = meta;
  for (const auto& tr : trajectories)
    if (tr.size() != meta.samples_per_trajectory)
      throw Error("dataset: ragged trajectory lengths");
  ds.trajectories = std::move(trajectories);
  return ds;
}

RawTrajectory excite(const SimState& init, const DlonTopology& topo, const UBounds& u_bounds,
                     double duration_s, double burn_in_s, std::uint64_t seed,
                     const SimParams& params) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Twist2 u(unit(rng) * u_bounds.max.x(), unit(rng) * u_bounds.max.y(),
                 unit(rng) * u_bounds.max.z());

  RawTrajectory raw;
  raw.fs = params.fs;
  raw.u = u;
  const int steps = static_cast<int>(std::round(duration_s * params.fs));
  const int burn = static_cast<int>(std::round(burn_in_s * params.fs));
  const double dt = 1.0 / params.fs;
  raw.states.reserve(steps - burn);

  SimState s = init.held_terminal() ? init : hold_terminal(init, topo, 0);
  for (int k = 0; k < steps; ++k) {
    if (k >= burn) raw.states.push_back(s);
    s = step(s, topo, u, dt, params);
  }
  return raw;
}

std::vector<Eigen::VectorXd> differentiate(const std::vector<Eigen::VectorXd>& series,
                                           double rate, const std::vector<bool>& angular) {
  const int n = static_cast<int>(series.size());
  if (n < 3) throw SeriesTooShort("differentiate: need at least 3 samples");
  const int dim = static_cast<int>(series[0].size());
  auto wrap = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd d = a - b;
    for (int c = 0; c < dim; ++c)
      if (c < static_cast<int>(angular.size()) && angular[c]) d[c] = normalize_angle(d[c]);
    return d;
  };
  // Single-step increments; all stencils are built from these so loading and
  // re-differentiating a saved series reproduces the stored values exactly.
  std::vector<Eigen::VectorXd> inc(n - 1);
  for (int k = 0; k + 1 < n; ++k) inc[k] = wrap(series[k + 1], series[k]);

  std::vector<Eigen::VectorXd> out(n);
  out[0] = (3.0 * inc[0] - inc[1]) * rate / 2.0;
  for (int k = 1; k + 1 < n; ++k) out[k] = (inc[k - 1] + inc[k]) * rate / 2.0;
  out[n - 1] = (3.0 * inc[n - 2] - inc[n - 3]) * rate / 2.0;
  return out;
}

Trajectory downsample(const RawTrajectory& raw, const DlonTopology& topo, double fc) {
  const double ratio = raw.fs / fc;
  const int m = static_cast<int>(std::round(ratio));
  if (std::abs(ratio - m) > 1e-9 || m < 1)
    throw IncompatibleRates("downsample: fs must be an integer multiple of fc");
  const int n = static_cast<int>(raw.states.size());
  if (n == 0) throw Error("downsample: empty trajectory");
  const int nj = static_cast<int>(raw.states[0].joint_angles.size());

  // Moving-average the state channels (joint angles and root pose, with the
  // root heading unwrapped) so y == observe(x) survives filtering.
  std::vector<double> unwrapped_theta(n);
  unwrapped_theta[0] = raw.states[0].root_pose.theta;
  for (int k = 1; k < n; ++k)
    unwrapped_theta[k] = unwrapped_theta[k - 1] +
        normalize_angle(raw.states[k].root_pose.theta - raw.states[k - 1].root_pose.theta);

  std::vector<SimState> filtered;
  filtered.reserve((n + m - 1) / m);
  for (int k = 0; k < n; k += m) {
    const int lo = std::max(0, k - m / 2);
    const int hi = std::min(n - 1, k + (m - 1) / 2);
    SimState s = raw.states[k];
    Eigen::VectorXd q = Eigen::VectorXd::Zero(nj);
    double x = 0, y = 0, th = 0;
    for (int i = lo; i <= hi; ++i) {
      q += raw.states[i].joint_angles;
      x += raw.states[i].root_pose.x;
      y += raw.states[i].root_pose.y;
      th += unwrapped_theta[i];
    }
    const double w = hi - lo + 1;
    s.joint_angles = q / w;
    s.root_pose = Pose2(x / w, y / w, th / w);
    filtered.push_back(std::move(s));
  }

  Trajectory traj;
  const int nt = topo.terminal_count();
  std::vector<Eigen::VectorXd> yser(filtered.size());
  for (size_t k = 0; k < filtered.size(); ++k) {
    TrajectorySample smp;
    smp.t = static_cast<double>(k) / fc;
    smp.u = raw.u;
    smp.y = observe(filtered[k], topo).poses;
    traj.samples.push_back(std::move(smp));
    yser[k] = traj.y_vec(static_cast<int>(k));
  }
  traj.states = std::move(filtered);

  if (traj.size() >= 3) {
    std::vector<bool> angular(3 * nt, false);
    for (int t = 0; t < nt; ++t) angular[3 * t + 2] = true;
    const auto dser = differentiate(yser, fc, angular);
    for (int k = 0; k < traj.size(); ++k) {
      auto& smp = traj.samples[k];
      smp.y_dot.resize(nt);
      for (int t = 0; t < nt; ++t) smp.y_dot[t] = Twist2::from_vec(dser[k].segment<3>(3 * t));
    }
  }
  return traj;
}

Dataset collect_dataset(const SimState& init, const DlonTopology& topo, const UBounds& u_bounds,
                        const DatasetConfig& cfg, const SimParams& params, int jobs) {
  std::vector<Trajectory> trajs(cfg.trajectories);
  auto work = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const auto raw = excite(init, topo, u_bounds, cfg.duration_s, cfg.burn_in_s,
                              cfg.seed + static_cast<std::uint64_t>(i), params);
      trajs[i] = downsample(raw, topo, cfg.fc);
    }
  };
  jobs = std::max(1, std::min(jobs, std::max(1, cfg.trajectories)));
  if (jobs == 1) {
    work(0, cfg.trajectories);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.trajectories + jobs - 1) / jobs;
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back(work, j * chunk, std::min(cfg.trajectories, (j + 1) * chunk));
    for (auto& th : pool) th.join();
  }

  DatasetMeta meta;
  meta.fs = params.fs;
  meta.fc = cfg.fc;
  meta.seed = cfg.seed;
  meta.topology_hash = topo.hash();
  meta.n_terminals = topo.terminal_count();
  meta.held_terminal = 0;
  meta.samples_per_trajectory = trajs.empty() ? 0 : trajs[0].size();
  return make_dataset(meta, std::move(trajs));
}

namespace {

std::string csv_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "traj_%04d.csv", i);
  return buf;
}

void write_csv(const std::string& path, const Trajectory& tr, int nt) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "t,u_vx,u_vy,u_w";
  for (int t = 0; t < nt; ++t)
    f << ",t" << t << "_x,t" << t << "_y,t" << t << "_th"
      << ",t" << t << "_vx,t" << t << "_vy,t" << t << "_w";
  f << "\n";
  char buf[40];
  auto put = [&](double v, bool lead_comma = true) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    if (lead_comma) f << ',';
    f << buf;
  };
  for (const auto& s : tr.samples) {
    put(s.t, false);
    put(s.u.vx);
    put(s.u.vy);
    put(s.u.omega);
    for (size_t t = 0; t < s.y.size(); ++t) {
      put(s.y[t].x);
      put(s.y[t].y);
      put(s.y[t].theta);
      put(s.y_dot[t].vx);
      put(s.y_dot[t].vy);
      put(s.y_dot[t].omega);
    }
    f << "\n";
  }
}

Trajectory read_csv(const std::string& path, int nt) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(f, line)) throw SchemaMismatch("empty trajectory file " + path);
  Trajectory tr;
  const int want = 4 + 6 * nt;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<double> row;
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (static_cast<int>(row.size()) != want)
      throw SchemaMismatch("unexpected column count in " + path);
    TrajectorySample s;
    s.t = row[0];
    s.u = Twist2(row[1], row[2], row[3]);
    for (int t = 0; t < nt; ++t) {
      const double* p = row.data() + 4 + 6 * t;
      s.y.push_back(Pose2(p[0], p[1], p[2]));
      s.y_dot.push_back(Twist2(p[3], p[4], p[5]));
    }
    tr.samples.push_back(std::move(s));
  }
  return tr;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  json meta;
  meta["fs"] = ds.meta.fs;
  meta["fc"] = ds.meta.fc;
  meta["seed"] = ds.meta.seed;
  meta["topology_hash"] = ds.meta.topology_hash;
  meta["n_terminals"] = ds.meta.n_terminals;
  meta["held_terminal"] = ds.meta.held_terminal;
  meta["samples_per_trajectory"] = ds.meta.samples_per_trajectory;
  meta["n_trajectories"] = ds.trajectories.size();
  std::ofstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw IoError("cannot write meta.json in " + dir);
  mf << meta.dump(2) << "\n";
  for (size_t i = 0; i < ds.trajectories.size(); ++i)
    write_csv((fs::path(dir) / csv_name(static_cast<int>(i))).string(), ds.trajectories[i],
              ds.meta.n_terminals);
}

Dataset load_dataset(const std::string& dir, std::optional<std::uint64_t> expected_hash) {
  const fs::path meta_path = fs::path(dir) / "meta.json";
  if (!fs::exists(meta_path)) throw MissingDataset("no dataset at " + dir);
  std::ifstream mf(meta_path);
  json meta = json::parse(mf);
  Dataset ds;
  ds.meta.fs = meta.at("fs");
  ds.meta.fc = meta.at("fc");
  ds.meta.seed = meta.at("seed");
  ds.meta.topology_hash = meta.at("topology_hash");
  ds.meta.n_terminals = meta.at("n_terminals");
  ds.meta.held_terminal = meta.at("held_terminal");
  ds.meta.samples_per_trajectory = meta.at("samples_per_trajectory");
  if (expected_hash && *expected_hash != ds.meta.topology_hash)
    throw SchemaMismatch("dataset topology hash does not match the current topology");
  const int n = meta.at("n_trajectories");
  for (int i = 0; i < n; ++i) {
    auto tr = read_csv((fs::path(dir) / csv_name(i)).string(), ds.meta.n_terminals);
    if (tr.size() != ds.meta.samples_per_trajectory)
      throw SchemaMismatch("trajectory length does not match metadata");
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

}  // namespace dlon
