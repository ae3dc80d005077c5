#include "swarmlab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "swarmlab/trace_io.hpp"

namespace swarmlab::experiment {

using nlohmann::json;

const std::vector<std::string>& demo_names() {
  static const std::vector<std::string> names{"consensus", "formation", "coverage", "swap"};
  return names;
}

config::ExperimentConfig demo_config(const std::string& name) {
  config::ExperimentConfig c;
  c.output.dir = "out/" + name;
  if (name == "consensus") {
    // Rendezvous drives every robot to one point, so bodies are point agents
    // here and the filter is off.
    c.controller.type = config::ControllerType::consensus;
    c.controller.graph = "cycle";
    c.filter = false;
    c.non_penetration = false;
  } else if (name == "formation") {
    // Gradient formation laws only converge locally; robots start on a circle
    // in the same cyclic order as the target polygon.
    c.controller.type = config::ControllerType::formation;
    c.controller.shape = "polygon";
    c.initial.layout = "circle";
    c.initial.radius = 0.4;
  } else if (name == "coverage") {
    c.controller.type = config::ControllerType::coverage;
    c.controller.density.refs = {{0, {0.3, 0.3}, 1.0}, {1, {-0.3, -0.2}, 0.5}};
  } else if (name == "swap") {
    c.robots = 4;
    c.duration = 60.0;
    c.controller.type = config::ControllerType::swap;
    c.initial.layout = "square";
    c.initial.radius = 0.4;
  } else {
    throw ConfigError("unknown demo '" + name + "' (expected consensus, formation, coverage or swap)");
  }
  return c;
}

double max_pairwise_distance(const std::vector<dynamics::Pose>& poses) {
  double m = 0.0;
  for (std::size_t i = 0; i < poses.size(); ++i)
    for (std::size_t j = i + 1; j < poses.size(); ++j)
      m = std::max(m, (poses[i].position() - poses[j].position()).norm());
  return m;
}

double min_pairwise_distance(const std::vector<dynamics::Pose>& poses) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < poses.size(); ++i)
    for (std::size_t j = i + 1; j < poses.size(); ++j)
      m = std::min(m, (poses[i].position() - poses[j].position()).norm());
  return m;
}

namespace {

Points positions(const std::vector<dynamics::Pose>& poses) {
  Points out;
  for (const auto& p : poses) out.push_back(p.position());
  return out;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json summarize(const config::ExperimentConfig& c, const sim::Trace& trace) {
  json s;
  s["status"] = trace.status;
  if (!trace.error.empty()) s["error"] = trace.error;
  s["controller"] = config::to_string(c.controller.type);
  s["robots"] = trace.robots;
  s["ticks"] = trace.ticks.size();
  s["simulated_seconds"] = static_cast<double>(trace.ticks.size()) * trace.dt;
  s["diagnostics"] = trace.diagnostics;

  const auto& final_poses = trace.ticks.empty() ? trace.initial : trace.ticks.back().poses;
  double min_dist = min_pairwise_distance(trace.initial);
  double min_clearance = std::numeric_limits<double>::infinity();
  std::size_t interventions = 0;
  const Bounds& b = c.safety.bounds;
  for (const auto& t : trace.ticks) {
    min_dist = std::min(min_dist, min_pairwise_distance(t.poses));
    for (const auto& p : t.poses)
      min_clearance = std::min({min_clearance, p.x - b.left, b.right - p.x, p.y - b.bottom, b.top - p.y});
    for (std::size_t i = 0; i < t.u_hat.size(); ++i)
      if ((t.u_star[i] - t.u_hat[i]).cwiseAbs().maxCoeff() > 1e-9) {
        ++interventions;
        break;
      }
  }
  s["min_pairwise_distance"] = finite_or_null(min_dist);
  s["final_max_pairwise_distance"] = max_pairwise_distance(final_poses);
  s["min_wall_clearance"] = finite_or_null(min_clearance);
  s["modified_ticks"] = interventions;

  if (!trace.ticks.empty()) {
    const auto score = sim::safety_score(trace, c.safety);
    s["safety_score"] = score.score;
    s["contact_events"] = score.contact_events;
    s["contact_samples"] = score.contact_samples;
    s["mean_collision_velocity"] = score.mean_collision_velocity;
    s["mean_contact_duration"] = score.mean_contact_duration;
  }

  const auto pts = positions(final_poses);
  switch (c.controller.type) {
    case config::ControllerType::formation: {
      const auto spec = config::formation_spec(c);
      json edges = json::array();
      double worst = 0.0;
      for (auto [i, j] : spec.topology.edges) {
        const double actual = (pts[static_cast<std::size_t>(i)] - pts[static_cast<std::size_t>(j)]).norm();
        const double err = actual - spec.distance(i, j);
        worst = std::max(worst, std::abs(err));
        edges.push_back({{"i", i}, {"j", j}, {"target", spec.distance(i, j)}, {"actual", actual}, {"error", err}});
      }
      s["final_edge_errors"] = edges;
      s["max_edge_error"] = worst;
      s["edge_tension_initial"] = controllers::edge_tension(positions(trace.initial), spec);
      s["edge_tension_final"] = controllers::edge_tension(pts, spec);
      break;
    }
    case config::ControllerType::coverage: {
      const geometry::Grid grid{c.safety.bounds, c.controller.resolution};
      const auto phi = geometry::sample_density(grid, c.controller.density, 0.0);
      json series = json::array();
      auto cost = [&](const Points& x) {
        const auto tess = geometry::tessellate(x, grid, phi);
        return std::pair{geometry::locational_cost(x, tess, grid, phi), tess};
      };
      series.push_back({{"t", 0.0}, {"H", cost(positions(trace.initial)).first}});
      for (std::size_t k = 0; k < trace.ticks.size(); ++k)
        if ((k + 1) % static_cast<std::size_t>(c.control_period_ticks) == 0)
          series.push_back({{"t", trace.ticks[k].t}, {"H", cost(positions(trace.ticks[k].poses)).first}});
      s["locational_cost"] = series;
      const auto [h, tess] = cost(pts);
      double worst = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) worst = std::max(worst, (pts[i] - tess.centroid[i]).norm());
      s["final_locational_cost"] = h;
      s["max_centroid_distance"] = worst;
      break;
    }
    case config::ControllerType::swap: {
      if (c.model != "single_integrator") break;
      const auto goals = config::swap_goals(trace.initial, c.safety.bounds);
      json errs = json::array();
      double worst = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        const double e = (pts[i] - goals[i]).norm();
        worst = std::max(worst, e);
        errs.push_back(e);
      }
      s["final_goal_errors"] = errs;
      s["max_goal_error"] = worst;
      json reached = nullptr;
      for (const auto& t : trace.ticks) {
        double w = 0.0;
        for (std::size_t i = 0; i < t.poses.size(); ++i) w = std::max(w, (t.poses[i].position() - goals[i]).norm());
        if (w <= 0.02) {
          reached = t.t;
          break;
        }
      }
      s["goals_reached_at"] = reached;
      break;
    }
    default: break;
  }
  return s;
}

std::string render_svg(const sim::Trace& trace, const Bounds& bounds, double robot_radius) {
  constexpr double size = 600.0, pad = 20.0;
  const double scale = (size - 2 * pad) / std::max(bounds.width(), bounds.height());
  auto sx = [&](double x) { return pad + (x - bounds.left) * scale; };
  auto sy = [&](double y) { return pad + (bounds.top - y) * scale; };
  auto num = [](double v) {
    std::ostringstream o;
    o.precision(6);
    o << v;
    return o.str();
  };
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  std::ostringstream svg;
  const double w = 2 * pad + bounds.width() * scale, h = 2 * pad + bounds.height() * scale;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
      << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << num(w) << "\" height=\"" << num(h) << "\" fill=\"white\"/>\n";
  svg << "<rect x=\"" << num(sx(bounds.left)) << "\" y=\"" << num(sy(bounds.top)) << "\" width=\""
      << num(bounds.width() * scale) << "\" height=\"" << num(bounds.height() * scale)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  const std::size_t n = trace.initial.size();
  const std::size_t stride = std::max<std::size_t>(1, trace.ticks.size() / 2000);
  for (std::size_t i = 0; i < n; ++i) {
    const char* colour = palette[i % 10];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    svg << num(sx(trace.initial[i].x)) << ',' << num(sy(trace.initial[i].y));
    for (std::size_t k = 0; k < trace.ticks.size(); k += stride)
      svg << ' ' << num(sx(trace.ticks[k].poses[i].x)) << ',' << num(sy(trace.ticks[k].poses[i].y));
    if (!trace.ticks.empty())
      svg << ' ' << num(sx(trace.ticks.back().poses[i].x)) << ',' << num(sy(trace.ticks.back().poses[i].y));
    svg << "\"/>\n";
    const double r = std::max(3.0, robot_radius * scale);
    svg << "<circle cx=\"" << num(sx(trace.initial[i].x)) << "\" cy=\"" << num(sy(trace.initial[i].y)) << "\" r=\""
        << num(r) << "\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    const auto& last = trace.ticks.empty() ? trace.initial[i] : trace.ticks.back().poses[i];
    svg << "<circle cx=\"" << num(sx(last.x)) << "\" cy=\"" << num(sy(last.y)) << "\" r=\"" << num(r) << "\" fill=\""
        << colour << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> write_outputs(const config::ExperimentConfig& c, const sim::Trace& trace,
                                       const json& summary) {
  std::vector<std::string> written;
  const std::string dir = c.output.dir;
  auto put = [&](const std::string& name, const std::string& text) {
    io::write_file(dir + "/" + name, text);
    written.push_back(dir + "/" + name);
  };
  if (c.output.trace) {
    std::ostringstream jsonl, csv, contacts;
    io::write_jsonl(trace, jsonl);
    io::write_csv(trace, csv);
    io::write_contacts_csv(trace, contacts);
    put("trace.jsonl", jsonl.str());
    put("trace.csv", csv.str());
    put("contacts.csv", contacts.str());
  }
  put("summary.json", summary.dump(2) + "\n");
  if (c.output.plot) put("trajectories.svg", render_svg(trace, c.safety.bounds, c.robot_radius));
  return written;
}

}  // namespace swarmlab::experiment
