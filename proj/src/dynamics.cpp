#include "swarmlab/dynamics.hpp"

#include <algorithm>

namespace swarmlab::dynamics {

namespace {

void require_finite(const Pose& p, const char* what) {
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta))
    throw InputDomainError(std::string(what) + ": non-finite pose");
}

void require_step(double dt, const char* what) {
  if (!std::isfinite(dt) || dt <= 0.0)
    throw InputDomainError(std::string(what) + ": dt must be finite and positive");
}

}  // namespace

void AbstractionParams::validate() const {
  if (!(l > 0.0) || !(wheel_base > 0.0) || !(wheel_radius > 0.0))
    throw ParameterError("abstraction parameters must be strictly positive");
}

Pose si_step(const Pose& pose, const Vec2& u, double dt) {
  require_finite(pose, "si_step");
  require_step(dt, "si_step");
  if (!all_finite(u)) throw InputDomainError("si_step: non-finite velocity");
  return {pose.x + u.x() * dt, pose.y + u.y() * dt, pose.theta};
}

Pose uni_step(const Pose& pose, const UniVelocity& cmd, double dt) {
  require_finite(pose, "uni_step");
  require_step(dt, "uni_step");
  if (!std::isfinite(cmd.v) || !std::isfinite(cmd.omega))
    throw InputDomainError("uni_step: non-finite command");
  return {pose.x + cmd.v * std::cos(pose.theta) * dt,
          pose.y + cmd.v * std::sin(pose.theta) * dt,
          wrap_angle(pose.theta + cmd.omega * dt)};
}

UniVelocity si_to_uni(const Vec2& u, const Pose& pose, const AbstractionParams& params) {
  if (!(params.l > 0.0)) throw ParameterError("si_to_uni: look-ahead offset must be positive");
  if (!all_finite(u)) throw InputDomainError("si_to_uni: non-finite velocity");
  require_finite(pose, "si_to_uni");
  const double c = std::cos(pose.theta);
  const double s = std::sin(pose.theta);
  return {c * u.x() + s * u.y(), (-s * u.x() + c * u.y()) / params.l};
}

Vec2 uni_to_si_point(const Pose& pose, const AbstractionParams& params) {
  if (!(params.l > 0.0)) throw ParameterError("uni_to_si_point: look-ahead offset must be positive");
  require_finite(pose, "uni_to_si_point");
  return {pose.x + params.l * std::cos(pose.theta), pose.y + params.l * std::sin(pose.theta)};
}

Vec2 si_point_to_center(const Vec2& point, double theta, const AbstractionParams& params) {
  return {point.x() - params.l * std::cos(theta), point.y() - params.l * std::sin(theta)};
}

UniVelocity go_to_goal(const Pose& pose, const Vec2& goal, const GoToGoalGains& gains) {
  const Vec2 delta = goal - pose.position();
  const double distance = delta.norm();
  if (distance < gains.arrival_tolerance) return {};
  const double bearing_error = wrap_angle(std::atan2(delta.y(), delta.x()) - pose.theta);
  const double v = gains.k_v * distance * std::cos(bearing_error);
  const double w = gains.k_w * bearing_error;
  return {std::clamp(v, -gains.v_max, gains.v_max), std::clamp(w, -gains.w_max, gains.w_max)};
}

}  // namespace swarmlab::dynamics
