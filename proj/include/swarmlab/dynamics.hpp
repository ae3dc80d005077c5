#pragma once

#include "swarmlab/common.hpp"

namespace swarmlab::dynamics {

/// Planar pose. `theta` is kept in (-pi, pi].
struct Pose {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  bool operator==(const Pose&) const = default;
};

struct UniVelocity {
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s
};

struct AbstractionParams {
  double l = 0.05;  // look-ahead offset of the controlled point
  double wheel_base = 0.1;
  double wheel_radius = 0.015;

  void validate() const;
  bool operator==(const AbstractionParams&) const = default;
};

struct GoToGoalGains {
  double k_v = 1.0;
  double k_w = 2.0;
  double v_max = 0.1;
  double w_max = 3.0;
  double arrival_tolerance = 1e-3;
};

/// Single-integrator explicit Euler step; heading is left untouched.
Pose si_step(const Pose& pose, const Vec2& u, double dt);

/// Unicycle explicit Euler step.
Pose uni_step(const Pose& pose, const UniVelocity& cmd, double dt);

/// Maps a velocity for the look-ahead point to unicycle commands.
///
/// The look-ahead point p = (x, y) + l (cos theta, sin theta) satisfies
/// p_dot = R(theta) diag(1, l) (v, omega), so the inverse is
/// (v, omega) = diag(1, 1/l) R(-theta) u.
UniVelocity si_to_uni(const Vec2& u, const Pose& pose, const AbstractionParams& params);

/// The look-ahead point controlled by `si_to_uni`.
Vec2 uni_to_si_point(const Pose& pose, const AbstractionParams& params);

/// Inverse of `uni_to_si_point` for a given heading.
Vec2 si_point_to_center(const Vec2& point, double theta, const AbstractionParams& params);

/// Proportional waypoint controller for a unicycle.
UniVelocity go_to_goal(const Pose& pose, const Vec2& goal, const GoToGoalGains& gains);

}  // namespace swarmlab::dynamics
