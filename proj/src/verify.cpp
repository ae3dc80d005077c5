#include "swarmlab/verify.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace swarmlab::verify {

std::vector<Scenario> default_suite(const config::ExperimentConfig& base) {
  std::vector<Scenario> suite;
  auto add = [&](std::string name, const std::string& layout, std::uint64_t seed) {
    config::ExperimentConfig c = base;
    c.duration = 30.0;
    c.filter = false;
    c.seed = seed;
    c.initial.layout = layout;
    c.initial.poses.clear();
    suite.push_back({std::move(name), c});
  };
  add("random-a", "random", base.seed);
  add("random-b", "random", base.seed + 1);
  add("cluster", "cluster", base.seed + 2);
  add("wall", "wall", base.seed + 3);
  add("crossing", "circle", base.seed + 4);
  return suite;
}

std::string to_string(Decision d) { return d == Decision::bypass_allowed ? "bypass_allowed" : "wrap_required"; }

Report verify(const std::vector<Scenario>& suite, const ControllerFactory& factory, double threshold) {
  if (suite.empty()) throw InputDomainError("verify: empty scenario suite");
  Report report;
  double velocity_sum = 0.0, duration_sum = 0.0;
  std::size_t events = 0;
  std::ostringstream diag;
  for (const auto& sc : suite) {
    ScenarioResult r;
    r.name = sc.name;
    config::ExperimentConfig c = sc.config;
    c.filter = false;
    try {
      const auto spec = config::make_run_spec(c);
      std::vector<dynamics::Pose> start;
      for (const auto& robot : spec.world.robots) start.push_back(robot.pose);
      auto controller = factory(c, start);
      const auto trace = sim::simulate(spec, *controller);
      r.ticks = trace.ticks.size();
      if (trace.status != "complete") {
        r.crashed = true;
        r.failure = trace.error;
      } else if (!trace.ticks.empty()) {
        const auto s = sim::safety_score(trace, c.safety);
        r.score = s.score;
        r.mean_collision_velocity = s.mean_collision_velocity;
        r.mean_contact_duration = s.mean_contact_duration;
      } else {
        r.score = 1.0;
      }
      r.contact_events = trace.events.size();
      for (const auto& e : trace.events) {
        velocity_sum += e.normal_speed;
        duration_sum += e.duration;
      }
      events += trace.events.size();
      for (const auto& d : trace.diagnostics) diag << sc.name << ": " << d << '\n';
    } catch (const std::exception& e) {
      r.crashed = true;
      r.failure = e.what();
    }
    if (r.crashed) {
      r.score = 0.0;
      diag << sc.name << ": controller failed: " << r.failure << '\n';
    } else if (r.contact_events > 0) {
      diag << sc.name << ": " << r.contact_events << " contact episode(s), mean impact speed "
           << r.mean_collision_velocity << " m/s\n";
    }
    report.scenarios.push_back(std::move(r));
  }
  report.aggregate = std::numeric_limits<double>::infinity();
  for (const auto& r : report.scenarios) report.aggregate = std::min(report.aggregate, r.score);
  if (events > 0) {
    report.mean_collision_velocity = velocity_sum / static_cast<double>(events);
    report.mean_contact_duration = duration_sum / static_cast<double>(events);
  }
  report.decision = report.aggregate >= threshold ? Decision::bypass_allowed : Decision::wrap_required;
  report.diagnostics = diag.str();
  return report;
}

nlohmann::json to_json(const Report& r) {
  nlohmann::json scenarios = nlohmann::json::array();
  for (const auto& s : r.scenarios) {
    nlohmann::json j = {{"name", s.name},
                        {"score", s.score},
                        {"mean_collision_velocity", s.mean_collision_velocity},
                        {"mean_contact_duration", s.mean_contact_duration},
                        {"contact_events", s.contact_events},
                        {"ticks", s.ticks},
                        {"crashed", s.crashed}};
    if (s.crashed) j["failure"] = s.failure;
    scenarios.push_back(j);
  }
  return {{"scenarios", scenarios},
          {"aggregate_score", r.aggregate},
          {"mean_collision_velocity", r.mean_collision_velocity},
          {"mean_contact_duration", r.mean_contact_duration},
          {"decision", to_string(r.decision)},
          {"diagnostics", r.diagnostics}};
}

std::string summary_text(const Report& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& s : r.scenarios) {
    out << "  " << s.name << ": S=" << s.score << " contacts=" << s.contact_events;
    if (s.crashed) out << " FAILED (" << s.failure << ")";
    out << '\n';
  }
  out << "aggregate S=" << r.aggregate << " (minimum over " << r.scenarios.size() << " scenarios)\n";
  out << "mean collision velocity=" << r.mean_collision_velocity << " m/s, mean contact duration="
      << r.mean_contact_duration << " s\n";
  out << "decision: " << to_string(r.decision) << '\n';
  if (!r.diagnostics.empty()) out << "diagnostics:\n" << r.diagnostics;
  return out.str();
}

}  // namespace swarmlab::verify
