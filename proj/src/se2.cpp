#include "dlon/se2.hpp"

#include <cmath>

#include "dlon/errors.hpp"

namespace dlon {

double normalize_angle(double theta) {
  if (theta > -M_PI && theta <= M_PI) return theta;  // already in range, keep exact
  const double two_pi = 2.0 * M_PI;
  double wrapped = std::fmod(theta + M_PI, two_pi);  // (-2pi, 2pi)
  if (wrapped <= 0.0) wrapped += two_pi;             // (0, 2pi]
  return wrapped - M_PI;                             // (-pi, pi]
}

Pose2::Pose2(double x_, double y_, double theta_)
    : x(x_), y(y_), theta(normalize_angle(theta_)) {}

Pose2 Pose2::compose(const Pose2& rhs) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {x + c * rhs.x - s * rhs.y, y + s * rhs.x + c * rhs.y, theta + rhs.theta};
}

Pose2 Pose2::inverse() const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {-c * x - s * y, s * x - c * y, -theta};
}

Eigen::Vector2d Pose2::transform(const Eigen::Vector2d& local) const {
  const double c = std::cos(theta), s = std::sin(theta);
  return {x + c * local.x() - s * local.y(), y + s * local.x() + c * local.y()};
}

Twist2::Twist2(double vx_, double vy_, double omega_) : vx(vx_), vy(vy_), omega(omega_) {
  if (!std::isfinite(vx) || !std::isfinite(vy) || !std::isfinite(omega))
    throw Error("Twist2: non-finite component");
}

double d_beta(const Pose2& p1, const Pose2& p2, double beta) {
  if (!(beta >= 0.0)) throw Error("d_beta: beta must be >= 0");
  const double dx = p1.x - p2.x;
  const double dy = p1.y - p2.y;
  const double dc = std::cos(p1.theta) - std::cos(p2.theta);
  const double ds = std::sin(p1.theta) - std::sin(p2.theta);
  return dx * dx + dy * dy + beta * (dc * dc + ds * ds);
}

Pose2 integrate_pose(const Pose2& p, const Twist2& u, double dt) {
  if (!(dt > 0.0)) throw Error("integrate_pose: dt must be > 0");
  return {p.x + dt * u.vx, p.y + dt * u.vy, p.theta + dt * u.omega};
}

}  // namespace dlon
