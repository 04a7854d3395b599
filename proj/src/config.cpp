#include "dlon/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dlon/errors.hpp"

using nlohmann::json;

namespace dlon {

namespace {

Pose2 pose_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaMismatch("config: pose needs [x, y, theta]");
  return Pose2(j[0], j[1], j[2]);
}

Eigen::Vector3d vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw SchemaMismatch("config: expected 3 values");
  return Eigen::Vector3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

void apply_override(json& root, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos) throw Error("override must look like section.key=value");
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);
  json* node = &root;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) keys.push_back(key);
  if (keys.empty()) throw Error("override: empty key path");
  for (size_t i = 0; i + 1 < keys.size(); ++i) node = &(*node)[keys[i]];
  json parsed = json::parse(value, nullptr, false);
  (*node)[keys.back()] = parsed.is_discarded() ? json(value) : parsed;
}

template <typename T>
void maybe(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

}  // namespace

ProjectConfig parse_config_text(const std::string& text,
                                const std::vector<std::string>& overrides) {
  json j = json::parse(text);
  for (const auto& o : overrides) apply_override(j, o);

  ProjectConfig cfg;

  if (j.contains("topology")) {
    const auto& t = j["topology"];
    maybe(t, "link_length", cfg.topology_spec.link_length);
    maybe(t, "branch_links", cfg.topology_spec.branch_links);
    maybe(t, "branch_rest", cfg.topology_spec.branch_rest);
    maybe(t, "link_drag", cfg.topology_spec.link_drag);
    auto& jp = cfg.topology_spec.joint;
    maybe(t, "stiffness", jp.stiffness);
    maybe(t, "damping", jp.damping);
    maybe(t, "angle_limit", jp.angle_limit);
    maybe(t, "friction_torque", jp.friction_torque);
  }

  if (j.contains("scenario")) {
    const auto& s = j["scenario"];
    if (s.contains("workspace")) {
      const auto& w = s["workspace"];
      if (!w.is_array() || w.size() != 4)
        throw SchemaMismatch("config: workspace needs [x_min, y_min, x_max, y_max]");
      cfg.scenario.x_min = w[0];
      cfg.scenario.y_min = w[1];
      cfg.scenario.x_max = w[2];
      cfg.scenario.y_max = w[3];
    }
    maybe(s, "terminal_radius", cfg.scenario.terminal_radius);
    maybe(s, "clearance", cfg.scenario.clearance);
    if (s.contains("obstacles"))
      for (const auto& o : s["obstacles"]) {
        Obstacle ob;
        ob.center = Eigen::Vector2d(o.at("center")[0].get<double>(),
                                    o.at("center")[1].get<double>());
        ob.radius = o.at("radius");
        cfg.scenario.obstacles.push_back(ob);
      }
    if (s.contains("receptacles"))
      for (const auto& r : s["receptacles"]) {
        Receptacle rc;
        rc.pose = pose_from(r.at("pose"));
        rc.insertion_offset = pose_from(r.at("offset"));
        cfg.scenario.receptacles.push_back(rc);
      }
    if (s.contains("start")) {
      cfg.start_pose = pose_from(s["start"].at("root_pose"));
      if (s["start"].contains("branch_curl"))
        cfg.start_curl = s["start"]["branch_curl"].get<std::vector<double>>();
    }
  }

  if (j.contains("simulation")) {
    const auto& s = j["simulation"];
    maybe(s, "fs", cfg.sim.fs);
    maybe(s, "pin_stiffness_lin", cfg.sim.pin_stiffness_lin);
    maybe(s, "pin_stiffness_ang", cfg.sim.pin_stiffness_ang);
    maybe(s, "pin_tolerance", cfg.sim.pin_tolerance);
    maybe(s, "relax_rate_tol", cfg.sim.relax_rate_tol);
    maybe(s, "relax_max_iters", cfg.sim.relax_max_iters);
  }

  if (j.contains("controller")) {
    const auto& c = j["controller"];
    maybe(c, "horizon", cfg.controller.horizon);
    if (c.contains("rate")) cfg.controller.dt = 1.0 / c["rate"].get<double>();
    if (c.contains("q")) cfg.controller.q = vec3_from(c["q"]);
    if (c.contains("q_delta")) cfg.controller.q_delta = vec3_from(c["q_delta"]);
    maybe(c, "terminal_weight", cfg.controller.terminal_weight);
    maybe(c, "beta", cfg.controller.beta);
    if (c.contains("u_max")) cfg.controller.u_max = vec3_from(c["u_max"]);
    maybe(c, "goal_tol", cfg.controller.goal_tol);
    maybe(c, "max_tm_steps", cfg.controller.max_tm_steps);
    maybe(c, "scp_iterations", cfg.controller.scp_iterations);
    maybe(c, "slack_weight", cfg.controller.slack_weight);
    maybe(c, "obstacle_screen", cfg.controller.obstacle_screen);
    maybe(c, "solver_eps", cfg.controller.solver_eps);
    maybe(c, "solver_max_iters", cfg.controller.solver_max_iters);
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    maybe(m, "gamma", cfg.model.gamma);
    maybe(m, "window", cfg.model.window);
    maybe(m, "ridge", cfg.model.ridge);
  }

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    maybe(d, "trajectories", cfg.dataset.trajectories);
    maybe(d, "duration_s", cfg.dataset.duration_s);
    maybe(d, "burn_in_s", cfg.dataset.burn_in_s);
    maybe(d, "fc", cfg.dataset.fc);
    maybe(d, "seed", cfg.dataset.seed);
  }

  return cfg;
}

ProjectConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), overrides);
}

}  // namespace dlon
