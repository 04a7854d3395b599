#pragma once

#include <Eigen/Core>

namespace dlon {

/// Wraps an angle into the half-open interval (-pi, pi].
double normalize_angle(double theta);

/// Planar pose (x, y, theta) in meters/radians.
/// theta is stored normalized to (-pi, pi].
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_);

  Eigen::Vector2d position() const { return {x, y}; }
  Eigen::Vector3d vec() const { return {x, y, theta}; }

  /// Group composition this * rhs, with rhs expressed in this frame.
  Pose2 compose(const Pose2& rhs) const;
  Pose2 inverse() const;

  /// Maps a point from this frame into the world frame.
  Eigen::Vector2d transform(const Eigen::Vector2d& local) const;
};

/// Planar twist (vx, vy, omega). Construction rejects non-finite components.
struct Twist2 {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;

  Twist2() = default;
  Twist2(double vx_, double vy_, double omega_);

  Eigen::Vector3d vec() const { return {vx, vy, omega}; }
  static Twist2 from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

/// Squared translational distance plus beta times the squared chord distance
/// between the unit heading vectors. Wrap-free in the heading by construction.
double d_beta(const Pose2& p1, const Pose2& p2, double beta);

/// Zero-order-hold integration of a world-frame twist: p + dt*u componentwise,
/// heading renormalized.
Pose2 integrate_pose(const Pose2& p, const Twist2& u, double dt);

}  // namespace dlon
