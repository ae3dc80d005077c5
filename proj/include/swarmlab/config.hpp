#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "swarmlab/controllers.hpp"
#include "swarmlab/dynamics.hpp"
#include "swarmlab/geometry.hpp"
#include "swarmlab/safety.hpp"
#include "swarmlab/sim.hpp"

namespace swarmlab::config {

/// Controllers scoring at least this in verification may run unfiltered.
inline constexpr double kBypassThreshold = 0.999;

enum class ControllerType { consensus, formation, coverage, swap, external, zero, random, headon };

std::string to_string(ControllerType t);
ControllerType controller_type_from_string(const std::string& s);

struct FormationEdge {
  int i = 0;
  int j = 0;
  double distance = 0.0;
  bool operator==(const FormationEdge&) const = default;
};

struct ControllerConfig {
  ControllerType type = ControllerType::consensus;

  // consensus
  std::string graph = "cycle";  // cycle | path | complete | explicit
  std::vector<std::pair<int, int>> edges;

  // formation
  std::string shape = "polygon";  // polygon | explicit
  double scale = 0.25;            // circumradius of the polygon shape
  double formation_gain = 10.0;
  std::vector<FormationEdge> formation_edges;

  // coverage
  double kappa = 1.0;
  std::string mode = "lloyd";  // lloyd | tvd_d1
  int resolution = 128;
  geometry::DensityField density{};

  // swap
  double goal_gain = 1.0;
  double circulation = 0.0;

  // external
  std::vector<std::string> command;
  double timeout = 5.0;

  // headon
  double speed = 0.1;

  bool operator==(const ControllerConfig&) const = default;
};

struct InitialConfig {
  /// random | cluster | circle | square | wall | explicit
  std::string layout = "random";
  double radius = 0.4;       // circle / square layouts
  double spread = 0.15;      // cluster layout
  double min_separation = 0.0;  // 0 selects 1.5 ds
  double wall_margin = 0.03;    // wall layout: clearance from the certificate bounds
  std::vector<dynamics::Pose> poses;

  bool operator==(const InitialConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  bool trace = true;
  bool plot = true;
  bool operator==(const OutputConfig&) const = default;
};

struct ExperimentConfig {
  int robots = 6;
  double duration = 30.0;
  double dt = 0.01;
  int control_period_ticks = 5;
  std::uint64_t seed = 1;
  bool filter = true;
  double robot_radius = 0.02;
  std::string model = "single_integrator";  // single_integrator | unicycle
  dynamics::AbstractionParams abstraction{};
  bool non_penetration = true;
  safety::SafetyParams safety{};
  ControllerConfig controller{};
  InitialConfig initial{};
  OutputConfig output{};

  /// Enforces every module invariant; throws ConfigError.
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Parses a configuration document. Unknown keys anywhere are rejected.
ExperimentConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
ExperimentConfig load_file(const std::string& path);

/// Overrides `SWARMLAB_<KEY>` environment variables onto top-level scalar
/// fields (ROBOTS, DURATION, DT, SEED, FILTER, CONTROL_PERIOD_TICKS).
void apply_environment(nlohmann::json& j);

/// Starting poses for the configured layout; deterministic in `seed`.
std::vector<dynamics::Pose> initial_poses(const ExperimentConfig& c);

/// Goals used by the swap controller: each start reflected through the
/// workspace centre.
Points swap_goals(const std::vector<dynamics::Pose>& start, const Bounds& bounds);

controllers::FormationSpec formation_spec(const ExperimentConfig& c);
Topology consensus_graph(const ExperimentConfig& c);

std::unique_ptr<controllers::Controller> make_controller(const ExperimentConfig& c,
                                                         const std::vector<dynamics::Pose>& start);

sim::RunSpec make_run_spec(const ExperimentConfig& c);

/// Builds the world and the configured controller, then simulates.
sim::Trace run(const ExperimentConfig& c);
/// Simulates with a caller-supplied controller.
sim::Trace run(const ExperimentConfig& c, controllers::Controller& controller);

}  // namespace swarmlab::config
