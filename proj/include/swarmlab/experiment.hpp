#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "swarmlab/config.hpp"
#include "swarmlab/sim.hpp"

namespace swarmlab::experiment {

/// Names accepted by `demo_config`.
const std::vector<std::string>& demo_names();

/// Preset configuration of a named demo: consensus, formation, coverage, swap.
config::ExperimentConfig demo_config(const std::string& name);

/// Largest centre distance over all pairs.
double max_pairwise_distance(const std::vector<dynamics::Pose>& poses);
/// Smallest centre distance over all pairs (infinity for fewer than two robots).
double min_pairwise_distance(const std::vector<dynamics::Pose>& poses);

/// Metrics of a finished run: score, distances, and controller-specific
/// quantities (edge errors, locational cost over time, goal errors).
nlohmann::json summarize(const config::ExperimentConfig& c, const sim::Trace& trace);

/// Trajectory plot: workspace outline, one polyline per robot, hollow start
/// markers and filled end markers.
std::string render_svg(const sim::Trace& trace, const Bounds& bounds, double robot_radius);

/// Writes trace.jsonl, trace.csv, contacts.csv, summary.json and
/// trajectories.svg under `c.output.dir` as enabled. Returns the paths written.
std::vector<std::string> write_outputs(const config::ExperimentConfig& c, const sim::Trace& trace,
                                       const nlohmann::json& summary);

}  // namespace swarmlab::experiment
