#pragma once

#include <string>
#include <vector>

#include "dlon/dataset.hpp"
#include "dlon/mpc.hpp"
#include "dlon/planner.hpp"
#include "dlon/sim.hpp"

namespace dlon {

/// Everything one benchmark problem needs: the network, its starting
/// placement, the environment, and the controller/model/dataset parameters.
struct ProjectConfig {
  BranchedSpec topology_spec;
  Pose2 start_pose;                  // junction placement
  std::vector<double> start_curl;    // per-branch initial bend
  Scenario scenario;
  SimParams sim;
  MpcConfig controller;
  ModelConfig model;
  DatasetConfig dataset;

  DlonTopology topology() const { return make_branched_topology(topology_spec); }
  SimState initial_state(const DlonTopology& topo) const {
    return make_initial_state(topo, start_pose, start_curl);
  }
  UBounds u_bounds() const {
    UBounds ub;
    ub.max = controller.u_max;
    return ub;
  }
};

/// Loads a config file, applying `overrides` ("a.b.c=value" dotted JSON
/// paths) before parsing the document into the typed structs.
ProjectConfig load_config(const std::string& path,
                          const std::vector<std::string>& overrides = {});

ProjectConfig parse_config_text(const std::string& text,
                                const std::vector<std::string>& overrides = {});

}  // namespace dlon
