#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dlon/commands.hpp"
#include "dlon/config.hpp"
#include "dlon/errors.hpp"

using namespace dlon;
namespace fs = std::filesystem;

namespace {

std::string scenario_file(const std::string& name) {
  return std::string(DLON_SCENARIO_DIR) + "/" + name + ".json";
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  const auto dir = fs::temp_directory_path() / ("dlon_cli_" + tag);
  fs::remove_all(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("config: loads every shipped scenario and applies overrides") {
  for (const char* name : {"default", "easy", "rotated", "obstacles", "wall"}) {
    const auto cfg = load_config(scenario_file(name));
    CHECK(cfg.topology_spec.branch_links.size() == 3);
    CHECK(cfg.scenario.receptacles.size() == 3);
    cfg.scenario.validate();
    cfg.topology();  // construction validates the tree
  }

  const auto cfg = load_config(scenario_file("easy"),
                               {"controller.horizon=7", "dataset.trajectories=3",
                                "topology.stiffness=0.2"});
  CHECK(cfg.controller.horizon == 7);
  CHECK(cfg.dataset.trajectories == 3);
  CHECK(cfg.topology_spec.joint.stiffness == doctest::Approx(0.2));
  CHECK_THROWS_AS(load_config(scenario_file("nope")), IoError);
  CHECK_THROWS_AS(load_config(scenario_file("easy"), {"bad-override"}), Error);
}

TEST_CASE("scenario geometry matches the problem descriptions") {
  const auto easy = load_config(scenario_file("easy"));
  const auto rotated = load_config(scenario_file("rotated"));
  // easy/rotated: the only obstacles are the receptacles themselves
  for (const auto* cfg : {&easy, &rotated}) {
    REQUIRE(cfg->scenario.obstacles.size() == cfg->scenario.receptacles.size());
    for (size_t i = 0; i < cfg->scenario.obstacles.size(); ++i) {
      const auto d = (cfg->scenario.obstacles[i].center -
                      cfg->scenario.receptacles[i].pose.position()).norm();
      CHECK(d < 1e-9);
    }
  }

  // obstacles: two added circles forming a narrowing wide enough to pass
  const auto obs = load_config(scenario_file("obstacles"));
  REQUIRE(obs.scenario.obstacles.size() == 5);
  const auto& a = obs.scenario.obstacles[3];
  const auto& b = obs.scenario.obstacles[4];
  const double gap = (a.center - b.center).norm() - obs.scenario.safety_radius(a) -
                     obs.scenario.safety_radius(b);
  CHECK(gap > 0.05);  // passable
  CHECK(gap < 0.40);  // but an actual narrowing

  // wall: a blocking row between the start and the goals with a side passage
  const auto wall = load_config(scenario_file("wall"));
  int in_row = 0;
  double row_y = 0, min_x = 1e9;
  for (const auto& o : wall.scenario.obstacles)
    if (o.radius > 0.04) {
      ++in_row;
      row_y = o.center.y();
      min_x = std::min(min_x, o.center.x());
    }
  CHECK(in_row >= 3);
  CHECK(wall.start_pose.y < row_y);                       // starts behind the wall
  for (const auto& r : wall.scenario.receptacles)
    if (std::abs(r.pose.theta - M_PI / 2) < 1e-6) CHECK(r.pose.y > row_y);  // goals beyond
  CHECK(min_x - wall.scenario.safety_radius({{0, 0}, 0.05}) >
        wall.scenario.x_min + 2 * wall.scenario.terminal_radius);  // passage exists
}

TEST_CASE("cmd_collect: trajectory count flag and byte determinism") {
  CliOptions opts;
  opts.scenario_path = scenario_file("default");
  opts.trajectories = 2;
  opts.overrides = {"dataset.duration_s=3.0", "dataset.burn_in_s=1.0"};
  opts.out_dir = temp_dir("collect_a");
  CHECK(cmd_collect(opts) == ExitOk);
  CHECK(fs::exists(fs::path(opts.out_dir) / "meta.json"));
  CHECK(fs::exists(fs::path(opts.out_dir) / "traj_0000.csv"));
  CHECK(fs::exists(fs::path(opts.out_dir) / "traj_0001.csv"));
  CHECK_FALSE(fs::exists(fs::path(opts.out_dir) / "traj_0002.csv"));

  CliOptions opts2 = opts;
  opts2.out_dir = temp_dir("collect_b");
  CHECK(cmd_collect(opts2) == ExitOk);
  CHECK(slurp(opts.out_dir + "/traj_0001.csv") == slurp(opts2.out_dir + "/traj_0001.csv"));
  CHECK(slurp(opts.out_dir + "/meta.json") == slurp(opts2.out_dir + "/meta.json"));
}

TEST_CASE("cmd_sysid and cmd_eval_models run on a small dataset") {
  CliOptions collect;
  collect.scenario_path = scenario_file("default");
  collect.trajectories = 10;
  collect.overrides = {"dataset.duration_s=9.0", "dataset.burn_in_s=1.0"};
  collect.out_dir = temp_dir("pipeline_data");
  collect.jobs = 4;
  REQUIRE(cmd_collect(collect) == ExitOk);

  CliOptions sysid;
  sysid.scenario_path = collect.scenario_path;
  sysid.overrides = collect.overrides;
  sysid.data_dir = collect.out_dir;
  sysid.out_dir = temp_dir("pipeline_sysid");
  CHECK(cmd_sysid(sysid) == ExitOk);
  CHECK(fs::exists(fs::path(sysid.out_dir) / "model.json"));
  CHECK(fs::exists(fs::path(sysid.out_dir) / "r2.csv"));
  CHECK(fs::exists(fs::path(sysid.out_dir) / "equations.txt"));

  CliOptions ev = sysid;
  ev.out_dir = temp_dir("pipeline_eval");
  CHECK(cmd_eval_models(ev) == ExitOk);
  const auto csv = slurp(ev.out_dir + "/prediction_errors.csv");
  int lines = 0;
  for (char c : csv)
    if (c == '\n') ++lines;
  CHECK(lines == 4);

  // missing dataset propagates the dedicated error
  CliOptions missing = sysid;
  missing.data_dir = temp_dir("no_such_data");
  CHECK_THROWS_AS(cmd_sysid(missing), MissingDataset);
}

TEST_CASE("svg artifacts are well-formed documents") {
  CliOptions opts;
  opts.scenario_path = scenario_file("default");
  opts.duration_s = 2.0;
  opts.out_dir = temp_dir("simulate");
  REQUIRE(cmd_simulate(opts) == ExitOk);
  const auto svg = slurp(opts.out_dir + "/scene.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("<polyline") != std::string::npos);
}
