#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "swarmlab/config.hpp"

namespace swarmlab::verify {

struct Scenario {
  std::string name;
  config::ExperimentConfig config;
};

/// Five 30 s scenarios built from `base` (robot count, safety parameters and
/// controller are kept): two random spreads, a tight cluster, robots lined up
/// along the walls, and a circle whose robots face each other across the
/// centre. The filter is off in every scenario.
std::vector<Scenario> default_suite(const config::ExperimentConfig& base);

struct ScenarioResult {
  std::string name;
  double score = 0.0;
  double mean_collision_velocity = 0.0;
  double mean_contact_duration = 0.0;
  std::size_t contact_events = 0;
  std::size_t ticks = 0;
  bool crashed = false;
  std::string failure;
};

enum class Decision { bypass_allowed, wrap_required };
std::string to_string(Decision d);

struct Report {
  std::vector<ScenarioResult> scenarios;
  double aggregate = 0.0;  // minimum over scenarios
  double mean_collision_velocity = 0.0;
  double mean_contact_duration = 0.0;
  Decision decision = Decision::wrap_required;
  std::string diagnostics;
};

/// Builds a fresh controller for one scenario, given its starting poses.
using ControllerFactory = std::function<std::unique_ptr<controllers::Controller>(
    const config::ExperimentConfig&, const std::vector<dynamics::Pose>&)>;

/// Runs every scenario with the filter forced off and scores it. A scenario
/// whose controller throws (at construction or during the run) scores 0.
/// Throws InputDomainError on an empty suite.
Report verify(const std::vector<Scenario>& suite, const ControllerFactory& factory = config::make_controller,
              double threshold = config::kBypassThreshold);

nlohmann::json to_json(const Report& r);
std::string summary_text(const Report& r);

}  // namespace swarmlab::verify
