#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "swarmlab/common.hpp"
#include "swarmlab/controllers.hpp"
#include "swarmlab/dynamics.hpp"
#include "swarmlab/geometry.hpp"
#include "swarmlab/qp.hpp"
#include "swarmlab/safety.hpp"

namespace swarmlab::sim {

/// Wall identifiers used in place of the second robot index of a contact.
enum Wall : int { wall_left = -1, wall_right = -2, wall_bottom = -3, wall_top = -4 };

std::string wall_name(int wall);

enum class Model { single_integrator, unicycle };

struct RobotState {
  int id = 0;
  dynamics::Pose pose{};
  double radius = 0.02;

  bool operator==(const RobotState&) const = default;
};

/// Contact episode between two bodies that is still touching.
struct OpenContact {
  double t_start = 0.0;
  double normal_speed = 0.0;
  double duration = 0.0;
  Vec2 commanded_i = Vec2::Zero();
  Vec2 commanded_j = Vec2::Zero();

  bool operator==(const OpenContact&) const = default;
};

/// One contact episode, closed once the bodies separate (or the run ends).
struct ContactEvent {
  double t = 0.0;
  int i = 0;
  int j = 0;
  double normal_speed = 0.0;  // approach speed at impact
  double duration = 0.0;
  Vec2 commanded_i = Vec2::Zero();
  Vec2 commanded_j = Vec2::Zero();

  bool operator==(const ContactEvent&) const = default;
};

/// Simulation state. The arena walls are `params.bounds`; the certificate
/// keeps robot centres one body radius inside them so that a filtered run
/// never touches a wall.
struct World {
  double t = 0.0;
  std::int64_t tick = 0;
  std::vector<RobotState> robots;
  safety::SafetyParams params{};
  double dt = 0.01;
  std::uint64_t rng_seed = 0;
  Model model = Model::single_integrator;
  dynamics::AbstractionParams abstraction{};
  bool non_penetration = true;
  std::map<std::pair<int, int>, OpenContact> open_contacts;
  /// Episodes that ended during the last steps, waiting to be moved into a trace.
  std::vector<ContactEvent> closed_contacts;

  void validate() const;
  Points positions() const;
  double max_radius() const;
  /// Positions the certificate is written for (look-ahead points for unicycles).
  Points certificate_points() const;
  /// Safety parameters adjusted for body size (and look-ahead offset).
  safety::SafetyParams certificate_params() const;
};

/// Narrow-phase overlap. `normal` points from robot i toward the other body.
struct Contact {
  int i = 0;
  int j = 0;  // robot index, or a Wall value
  double depth = 0.0;
  Vec2 normal = Vec2::UnitX();
};

struct ContactSample {
  int i = 0;
  int j = 0;
  double normal_speed = 0.0;

  bool operator==(const ContactSample&) const = default;
};

/// State after one tick, with the commands that were applied during it.
struct TickRecord {
  std::int64_t tick = 0;
  double t = 0.0;
  std::vector<dynamics::Pose> poses;
  Commands u_hat;
  Commands u_star;
  bool filtered = false;
  qp::Status filter_status = qp::Status::optimal;
  bool unsafe_state = false;
  std::vector<ContactSample> contacts;
  bool penetration_unresolved = false;

  bool operator==(const TickRecord&) const = default;
};

struct Trace {
  nlohmann::json config = nlohmann::json::object();
  int robots = 0;
  double dt = 0.0;
  std::vector<dynamics::Pose> initial;
  std::vector<TickRecord> ticks;
  std::vector<ContactEvent> events;
  std::string status = "complete";  // or "error"
  std::string error;
  std::vector<std::string> diagnostics;

  bool operator==(const Trace&) const = default;
};

/// Broad phase (uniform spatial hash plus wall band) and narrow phase
/// (circle-circle, circle-wall). Results are sorted by (i, j).
std::vector<Contact> detect_collisions(const World& world);

struct ResolveReport {
  int passes = 0;
  double max_depth = 0.0;
  bool resolved = true;
};

/// Positional Gauss-Seidel projection: pairs are pushed apart by half the
/// depth each, walls push a robot back by the full depth. No impulses.
ResolveReport resolve_nonpenetration(World& world, const std::vector<Contact>& contacts, int max_passes = 8,
                                     double tolerance = 1e-9);

/// Advances the world by one tick. Throws InputDomainError for malformed or
/// non-finite commands, leaving the world untouched.
TickRecord step(World& world, const Commands& u_hat, bool use_filter, safety::SafetyFilter* filter = nullptr);

/// Closes every open contact episode into `trace.events`.
void flush_contacts(World& world, Trace& trace);

struct ScoreReport {
  double score = 1.0;
  double mean_collision_velocity = 0.0;
  double mean_contact_duration = 0.0;
  std::size_t contact_samples = 0;
  std::size_t contact_events = 0;
  std::size_t ticks = 0;
};

/// S = 1 - (sum of per-tick contact normal speeds) / (N * ticks * alpha),
/// clamped to [0, 1]. Throws InputDomainError on an empty trace.
ScoreReport safety_score(const Trace& trace, const safety::SafetyParams& params);

struct RunSpec {
  World world;
  double duration = 30.0;
  int control_period_ticks = 5;
  bool use_filter = true;
  geometry::DensityField density{};
  /// Called once per control period before the controller, e.g. to apply
  /// queued density updates.
  std::function<void(World&, geometry::DensityField&)> before_control;
  nlohmann::json config_snapshot = nlohmann::json::object();
};

std::int64_t tick_count(double duration, double dt);

/// Runs a complete experiment. Controller exceptions and rejected commands
/// truncate the trace and set its status to "error".
Trace simulate(const RunSpec& spec, controllers::Controller& controller);

}  // namespace swarmlab::sim
