#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace swarmlab {

using Vec2 = Eigen::Vector2d;

/// Positions of a robot team, one entry per robot.
using Points = std::vector<Vec2>;
/// Single-integrator velocity commands, one entry per robot.
using Commands = std::vector<Vec2>;

// Error families. Every error raised by the library derives from one of these.
struct InputDomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Axis-aligned workspace rectangle [left, right] x [bottom, top].
struct Bounds {
  double left = -0.6;
  double right = 0.6;
  double bottom = -0.6;
  double top = 0.6;

  double width() const { return right - left; }
  double height() const { return top - bottom; }
  Vec2 center() const { return {0.5 * (left + right), 0.5 * (bottom + top)}; }

  bool contains(const Vec2& p, double slack = 0.0) const {
    return p.x() >= left - slack && p.x() <= right + slack &&
           p.y() >= bottom - slack && p.y() <= top + slack;
  }

  /// Rectangle shrunk by `margin` on every side.
  Bounds inset(double margin) const {
    return {left + margin, right - margin, bottom + margin, top - margin};
  }

  bool operator==(const Bounds&) const = default;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);  // [-pi, pi]
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

inline bool all_finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

inline bool all_finite(std::span<const Vec2> vs) {
  for (const auto& v : vs)
    if (!all_finite(v)) return false;
  return true;
}

}  // namespace swarmlab
