#pragma once

#include <string>
#include <vector>

#include "dlon/planner.hpp"
#include "dlon/sim.hpp"

namespace dlon {

/// Minimal SVG canvas over a world-frame box (y axis up).
class SvgCanvas {
 public:
  SvgCanvas(double x_min, double y_min, double x_max, double y_max, int pixel_width = 720);

  void rect(double x_min, double y_min, double x_max, double y_max, const std::string& stroke,
            const std::string& fill = "none");
  void circle(double cx, double cy, double r, const std::string& stroke,
              const std::string& fill = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double width = 1.5);
  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke,
                double width = 1.5);
  void arrow(const Pose2& pose, double length, const std::string& stroke);
  void text(double x, double y, const std::string& s, int px = 12);

  std::string finish() const;
  void write(const std::string& path) const;

 private:
  double px(double x) const;
  double py(double y) const;
  double x0_, y0_, x1_, y1_;
  int w_, h_;
  double scale_;
  std::string body_;
};

/// Workspace, obstacles, receptacles and goals, the network polyline at its
/// initial and final states, and the recorded terminal paths.
void write_scene_svg(const std::string& path, const Scenario& sc, const DlonTopology& topo,
                     const SimState& initial, const SimState& final_state,
                     const std::vector<std::vector<Eigen::Vector2d>>& terminal_paths);

/// Margin and blend-weight time series from an installation event log.
void write_timeseries_svg(const std::string& path, const std::vector<InstallEvent>& events);

}  // namespace dlon
