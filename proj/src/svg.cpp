#include "dlon/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dlon/errors.hpp"

namespace dlon {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

const char* kPalette[6] = {"#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b"};

}  // namespace

SvgCanvas::SvgCanvas(double x_min, double y_min, double x_max, double y_max, int pixel_width)
    : x0_(x_min), y0_(y_min), x1_(x_max), y1_(y_max), w_(pixel_width) {
  scale_ = w_ / (x1_ - x0_);
  h_ = static_cast<int>(std::lround((y1_ - y0_) * scale_));
}

double SvgCanvas::px(double x) const { return (x - x0_) * scale_; }
double SvgCanvas::py(double y) const { return h_ - (y - y0_) * scale_; }

void SvgCanvas::rect(double xa, double ya, double xb, double yb, const std::string& stroke,
                     const std::string& fill) {
  body_ += "<rect x=\"" + fmt(px(xa)) + "\" y=\"" + fmt(py(yb)) + "\" width=\"" +
           fmt((xb - xa) * scale_) + "\" height=\"" + fmt((yb - ya) * scale_) +
           "\" stroke=\"" + stroke + "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::circle(double cx, double cy, double r, const std::string& stroke,
                       const std::string& fill) {
  body_ += "<circle cx=\"" + fmt(px(cx)) + "\" cy=\"" + fmt(py(cy)) + "\" r=\"" +
           fmt(r * scale_) + "\" stroke=\"" + stroke + "\" fill=\"" + fill + "\"/>\n";
}

void SvgCanvas::line(double xa, double ya, double xb, double yb, const std::string& stroke,
                     double width) {
  body_ += "<line x1=\"" + fmt(px(xa)) + "\" y1=\"" + fmt(py(ya)) + "\" x2=\"" + fmt(px(xb)) +
           "\" y2=\"" + fmt(py(yb)) + "\" stroke=\"" + stroke + "\" stroke-width=\"" +
           fmt(width) + "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts,
                         const std::string& stroke, double width) {
  if (pts.size() < 2) return;
  body_ += "<polyline points=\"";
  for (const auto& [x, y] : pts) body_ += fmt(px(x)) + "," + fmt(py(y)) + " ";
  body_ += "\" stroke=\"" + stroke + "\" stroke-width=\"" + fmt(width) + "\" fill=\"none\"/>\n";
}

void SvgCanvas::arrow(const Pose2& pose, double length, const std::string& stroke) {
  const double hx = pose.x + length * std::cos(pose.theta);
  const double hy = pose.y + length * std::sin(pose.theta);
  line(pose.x, pose.y, hx, hy, stroke, 2.0);
  for (double side : {0.6, -0.6}) {
    const double a = pose.theta + M_PI + side;
    line(hx, hy, hx + 0.35 * length * std::cos(a), hy + 0.35 * length * std::sin(a), stroke,
         2.0);
  }
}

void SvgCanvas::text(double x, double y, const std::string& s, int pt) {
  body_ += "<text x=\"" + fmt(px(x)) + "\" y=\"" + fmt(py(y)) + "\" font-size=\"" +
           std::to_string(pt) + "\" font-family=\"sans-serif\">" + s + "</text>\n";
}

std::string SvgCanvas::finish() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w_) +
         "\" height=\"" + std::to_string(h_) + "\" viewBox=\"0 0 " + std::to_string(w_) + " " +
         std::to_string(h_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
         body_ + "</svg>\n";
}

void SvgCanvas::write(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << finish();
}

namespace {

void draw_network(SvgCanvas& svg, const DlonTopology& topo, const SimState& state,
                  const std::string& stroke, double width) {
  const auto poses = link_poses(state, topo);
  for (int l = 0; l < topo.link_count(); ++l) {
    const auto tip = poses[l].transform({topo.links[l].length, 0.0});
    svg.line(poses[l].x, poses[l].y, tip.x(), tip.y(), stroke, width);
  }
  const auto y = observe(state, topo);
  for (int t = 0; t < y.size(); ++t)
    svg.circle(y.poses[t].x, y.poses[t].y, 0.012, stroke, stroke);
}

}  // namespace

void write_scene_svg(const std::string& path, const Scenario& sc, const DlonTopology& topo,
                     const SimState& initial, const SimState& final_state,
                     const std::vector<std::vector<Eigen::Vector2d>>& terminal_paths) {
  const double pad = 0.05;
  SvgCanvas svg(sc.x_min - pad, sc.y_min - pad, sc.x_max + pad, sc.y_max + pad);
  svg.rect(sc.x_min, sc.y_min, sc.x_max, sc.y_max, "#c8a400");
  for (const auto& o : sc.obstacles) {
    svg.circle(o.center.x(), o.center.y(), o.radius, "#666666", "#dddddd");
    svg.circle(o.center.x(), o.center.y(), sc.safety_radius(o), "#bbbbbb");
  }
  for (size_t t = 0; t < sc.receptacles.size(); ++t) {
    const auto& color = kPalette[t % 6];
    svg.arrow(sc.receptacles[t].pose, 0.05, color);
    const Pose2 g = sc.goal(static_cast<int>(t));
    svg.circle(g.x, g.y, 0.008, color, "none");
  }
  for (size_t t = 0; t < terminal_paths.size(); ++t) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : terminal_paths[t]) pts.push_back({p.x(), p.y()});
    svg.polyline(pts, kPalette[t % 6], 1.0);
  }
  draw_network(svg, topo, initial, "#999999", 2.0);
  draw_network(svg, topo, final_state, "#222222", 2.5);
  svg.write(path);
}

void write_timeseries_svg(const std::string& path, const std::vector<InstallEvent>& events) {
  if (events.empty()) {
    SvgCanvas svg(0, 0, 1, 1);
    svg.text(0.1, 0.5, "no events");
    svg.write(path);
    return;
  }
  double t_max = events.back().t;
  double c_lo = 0, c_hi = 0;
  for (const auto& e : events) {
    c_lo = std::min(c_lo, e.c_max);
    c_hi = std::max(c_hi, e.c_max);
  }
  const double span = std::max(1e-6, c_hi - c_lo);
  SvgCanvas svg(0, 0, 1.2, 0.9);
  auto sx = [&](double t) { return 0.1 + (t / std::max(1e-9, t_max)) * 1.0; };
  auto sy = [&](double c) { return 0.1 + (c - c_lo) / span * 0.7; };
  svg.line(0.1, sy(0.0), 1.1, sy(0.0), "#888888", 1.0);  // violation threshold
  std::vector<std::pair<double, double>> margin, alpha;
  for (const auto& e : events) {
    margin.push_back({sx(e.t), sy(e.c_max)});
    alpha.push_back({sx(e.t), 0.1 + e.alpha * 0.7});
  }
  svg.polyline(margin, "#d62728");
  svg.polyline(alpha, "#1f77b4", 1.0);
  svg.text(0.12, 0.85, "max c(y) (red), blend weight (blue), zero line (grey)");
  svg.write(path);
}

}  // namespace dlon
