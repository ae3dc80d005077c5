#include "swarmlab/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "swarmlab/external.hpp"

namespace swarmlab::config {

using nlohmann::json;

std::string to_string(ControllerType t) {
  switch (t) {
    case ControllerType::consensus: return "consensus";
    case ControllerType::formation: return "formation";
    case ControllerType::coverage: return "coverage";
    case ControllerType::swap: return "swap";
    case ControllerType::external: return "external";
    case ControllerType::zero: return "zero";
    case ControllerType::random: return "random";
    case ControllerType::headon: return "headon";
  }
  return "unknown";
}

ControllerType controller_type_from_string(const std::string& s) {
  for (auto t : {ControllerType::consensus, ControllerType::formation, ControllerType::coverage, ControllerType::swap,
                 ControllerType::external, ControllerType::zero, ControllerType::random, ControllerType::headon})
    if (to_string(t) == s) return t;
  throw ConfigError("config: unknown controller type '" + s + "'");
}

namespace {

// Reads the fields of one JSON object and rejects any key it was not asked for.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: " + where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      read(*it, out);
    } catch (const json::exception&) {
      throw ConfigError("config: " + where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "document" : "'" + path_ + "'";
    return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
  }

  std::string path(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown key " + where(key));
  }

 private:
  static void read(const json& v, double& out) {
    if (!v.is_number()) throw json::type_error::create(302, "number expected", &v);
    out = v.get<double>();
  }
  static void read(const json& v, int& out) {
    if (!v.is_number_integer()) throw json::type_error::create(302, "integer expected", &v);
    out = v.get<int>();
  }
  static void read(const json& v, std::uint64_t& out) {
    if (!v.is_number_unsigned()) throw json::type_error::create(302, "unsigned integer expected", &v);
    out = v.get<std::uint64_t>();
  }
  static void read(const json& v, bool& out) {
    if (!v.is_boolean()) throw json::type_error::create(302, "boolean expected", &v);
    out = v.get<bool>();
  }
  static void read(const json& v, std::string& out) {
    if (!v.is_string()) throw json::type_error::create(302, "string expected", &v);
    out = v.get<std::string>();
  }
  static void read(const json& v, std::vector<std::string>& out) {
    if (!v.is_array()) throw json::type_error::create(302, "array expected", &v);
    out = v.get<std::vector<std::string>>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json bounds_json(const Bounds& b) {
  return {{"left", b.left}, {"right", b.right}, {"bottom", b.bottom}, {"top", b.top}};
}

Bounds read_bounds(const json& j, const std::string& path) {
  Fields f(j, path);
  Bounds b;
  f.get("left", b.left);
  f.get("right", b.right);
  f.get("bottom", b.bottom);
  f.get("top", b.top);
  f.finish();
  return b;
}

json density_json(const geometry::DensityField& d) {
  json refs = json::array();
  for (const auto& r : d.refs)
    refs.push_back({{"id", r.id}, {"x", r.position.x()}, {"y", r.position.y()}, {"w", r.weight}});
  return {{"sigma", d.sigma}, {"floor", d.floor}, {"refs", refs}};
}

geometry::DensityField read_density(const json& j, const std::string& path) {
  Fields f(j, path);
  geometry::DensityField d;
  f.get("sigma", d.sigma);
  f.get("floor", d.floor);
  if (const json* refs = f.child("refs")) {
    if (!refs->is_array()) throw ConfigError("config: '" + path + ".refs' must be an array");
    for (std::size_t k = 0; k < refs->size(); ++k) {
      Fields r((*refs)[k], path + ".refs[" + std::to_string(k) + "]");
      geometry::DensityRef ref;
      double x = 0.0, y = 0.0;
      r.get("id", ref.id);
      r.get("x", x);
      r.get("y", y);
      r.get("w", ref.weight);
      r.finish();
      ref.position = {x, y};
      d.refs.push_back(ref);
    }
  }
  f.finish();
  return d;
}

std::pair<int, int> read_edge(const json& e, const std::string& path) {
  if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
    throw ConfigError("config: '" + path + "' must be a pair of robot indices");
  return {e[0].get<int>(), e[1].get<int>()};
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  require(robots >= 1 && robots <= 200, "robots must be in [1, 200]");
  require(std::isfinite(duration) && duration >= 0.0, "duration must be non-negative");
  require(finite_positive(dt), "dt must be positive");
  require(control_period_ticks >= 1, "control_period_ticks must be at least 1");
  require(finite_positive(robot_radius), "robot_radius must be positive");
  require(model == "single_integrator" || model == "unicycle", "model must be single_integrator or unicycle");
  try {
    safety.validate();
    if (model == "unicycle") abstraction.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  require(safety.ds >= 2.0 * robot_radius, "safety.ds must be at least twice robot_radius");
  const double margin = robot_radius + (model == "unicycle" ? 2.0 * abstraction.l : 0.0);
  require(safety.bounds.width() > 2.0 * margin && safety.bounds.height() > 2.0 * margin,
          "workspace too small for the robot radius");

  // Coverage settings are checked whatever the controller: `serve` switches
  // any configuration to coverage.
  const auto& k = controller;
  require(finite_positive(k.kappa), "controller.kappa must be positive");
  require(k.mode == "lloyd" || k.mode == "tvd_d1", "controller.mode must be lloyd or tvd_d1");
  require(k.resolution >= 16 && k.resolution <= 1024, "controller.resolution must be in [16, 1024]");
  try {
    k.density.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: controller.density: ") + e.what());
  }
  switch (k.type) {
    case ControllerType::consensus:
      require(k.graph == "cycle" || k.graph == "path" || k.graph == "complete" || k.graph == "explicit",
              "controller.graph must be cycle, path, complete or explicit");
      break;
    case ControllerType::formation:
      require(k.shape == "polygon" || k.shape == "explicit", "controller.shape must be polygon or explicit");
      require(finite_positive(k.scale), "controller.scale must be positive");
      require(finite_positive(k.formation_gain), "controller.formation_gain must be positive");
      break;
    case ControllerType::coverage:
      break;
    case ControllerType::swap:
      require(finite_positive(k.goal_gain), "controller.goal_gain must be positive");
      require(std::abs(k.circulation) < 0.5 * std::numbers::pi, "controller.circulation must be in (-pi/2, pi/2)");
      break;
    case ControllerType::external:
      require(!k.command.empty() && !k.command.front().empty(), "controller.command must name an executable");
      require(finite_positive(k.timeout), "controller.timeout must be positive");
      break;
    case ControllerType::headon:
      require(finite_positive(k.speed), "controller.speed must be positive");
      break;
    case ControllerType::zero:
    case ControllerType::random:
      break;
  }
  if (k.type == ControllerType::consensus && k.graph == "explicit") consensus_graph(*this);
  if (k.type == ControllerType::formation) formation_spec(*this);

  const auto& in = initial;
  require(in.layout == "random" || in.layout == "cluster" || in.layout == "circle" || in.layout == "square" ||
              in.layout == "wall" || in.layout == "explicit",
          "initial.layout must be random, cluster, circle, square, wall or explicit");
  require(finite_positive(in.radius), "initial.radius must be positive");
  require(finite_positive(in.spread), "initial.spread must be positive");
  require(std::isfinite(in.min_separation) && in.min_separation >= 0.0, "initial.min_separation must be non-negative");
  require(std::isfinite(in.wall_margin) && in.wall_margin >= 0.0, "initial.wall_margin must be non-negative");
  if (in.layout == "explicit") {
    require(static_cast<int>(in.poses.size()) == robots, "initial.poses must hold one pose per robot");
    for (const auto& p : in.poses) {
      require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.theta), "initial.poses must be finite");
      require(safety.bounds.contains(p.position()), "initial.poses must lie inside the workspace");
    }
  }
  require(!output.dir.empty(), "output.dir must not be empty");
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  Fields f(j, "");
  f.get("robots", c.robots);
  f.get("duration", c.duration);
  f.get("dt", c.dt);
  f.get("control_period_ticks", c.control_period_ticks);
  f.get("seed", c.seed);
  f.get("filter", c.filter);
  f.get("robot_radius", c.robot_radius);
  f.get("model", c.model);
  f.get("non_penetration", c.non_penetration);

  if (const json* a = f.child("abstraction")) {
    Fields g(*a, "abstraction");
    g.get("l", c.abstraction.l);
    g.get("wheel_base", c.abstraction.wheel_base);
    g.get("wheel_radius", c.abstraction.wheel_radius);
    g.finish();
  }
  if (const json* s = f.child("safety")) {
    Fields g(*s, "safety");
    g.get("ds", c.safety.ds);
    g.get("gamma", c.safety.gamma);
    g.get("alpha", c.safety.alpha);
    if (const json* b = g.child("bounds")) c.safety.bounds = read_bounds(*b, "safety.bounds");
    g.finish();
  }
  if (const json* k = f.child("controller")) {
    Fields g(*k, "controller");
    auto& cc = c.controller;
    std::string type = to_string(cc.type);
    g.get("type", type);
    cc.type = controller_type_from_string(type);
    g.get("graph", cc.graph);
    if (const json* e = g.child("edges")) {
      require(e->is_array(), "'controller.edges' must be an array");
      for (std::size_t n = 0; n < e->size(); ++n)
        cc.edges.push_back(read_edge((*e)[n], "controller.edges[" + std::to_string(n) + "]"));
    }
    g.get("shape", cc.shape);
    g.get("scale", cc.scale);
    g.get("formation_gain", cc.formation_gain);
    if (const json* e = g.child("formation_edges")) {
      require(e->is_array(), "'controller.formation_edges' must be an array");
      for (std::size_t n = 0; n < e->size(); ++n) {
        Fields h((*e)[n], "controller.formation_edges[" + std::to_string(n) + "]");
        FormationEdge fe;
        h.get("i", fe.i);
        h.get("j", fe.j);
        h.get("distance", fe.distance);
        h.finish();
        cc.formation_edges.push_back(fe);
      }
    }
    g.get("kappa", cc.kappa);
    g.get("mode", cc.mode);
    g.get("resolution", cc.resolution);
    if (const json* d = g.child("density")) cc.density = read_density(*d, "controller.density");
    g.get("goal_gain", cc.goal_gain);
    g.get("circulation", cc.circulation);
    g.get("command", cc.command);
    g.get("timeout", cc.timeout);
    g.get("speed", cc.speed);
    g.finish();
  }
  if (const json* i = f.child("initial")) {
    Fields g(*i, "initial");
    g.get("layout", c.initial.layout);
    g.get("radius", c.initial.radius);
    g.get("spread", c.initial.spread);
    g.get("min_separation", c.initial.min_separation);
    g.get("wall_margin", c.initial.wall_margin);
    if (const json* p = g.child("poses")) {
      require(p->is_array(), "'initial.poses' must be an array");
      for (const auto& pose : *p) {
        require(pose.is_array() && (pose.size() == 2 || pose.size() == 3), "'initial.poses' entries are [x, y, theta]");
        for (const auto& v : pose) require(v.is_number(), "'initial.poses' entries must be numbers");
        c.initial.poses.push_back({pose[0].get<double>(), pose[1].get<double>(),
                                   pose.size() == 3 ? pose[2].get<double>() : 0.0});
      }
    }
    g.finish();
  }
  if (const json* o = f.child("output")) {
    Fields g(*o, "output");
    g.get("dir", c.output.dir);
    g.get("trace", c.output.trace);
    g.get("plot", c.output.plot);
    g.finish();
  }
  f.finish();
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  const auto& k = c.controller;
  json edges = json::array();
  for (auto [i, j] : k.edges) edges.push_back({i, j});
  json formation_edges = json::array();
  for (const auto& e : k.formation_edges) formation_edges.push_back({{"i", e.i}, {"j", e.j}, {"distance", e.distance}});
  json poses = json::array();
  for (const auto& p : c.initial.poses) poses.push_back({p.x, p.y, p.theta});
  return {
      {"robots", c.robots},
      {"duration", c.duration},
      {"dt", c.dt},
      {"control_period_ticks", c.control_period_ticks},
      {"seed", c.seed},
      {"filter", c.filter},
      {"robot_radius", c.robot_radius},
      {"model", c.model},
      {"non_penetration", c.non_penetration},
      {"abstraction",
       {{"l", c.abstraction.l}, {"wheel_base", c.abstraction.wheel_base}, {"wheel_radius", c.abstraction.wheel_radius}}},
      {"safety",
       {{"ds", c.safety.ds}, {"gamma", c.safety.gamma}, {"alpha", c.safety.alpha}, {"bounds", bounds_json(c.safety.bounds)}}},
      {"controller",
       {{"type", to_string(k.type)},
        {"graph", k.graph},
        {"edges", edges},
        {"shape", k.shape},
        {"scale", k.scale},
        {"formation_gain", k.formation_gain},
        {"formation_edges", formation_edges},
        {"kappa", k.kappa},
        {"mode", k.mode},
        {"resolution", k.resolution},
        {"density", density_json(k.density)},
        {"goal_gain", k.goal_gain},
        {"circulation", k.circulation},
        {"command", k.command},
        {"timeout", k.timeout},
        {"speed", k.speed}}},
      {"initial",
       {{"layout", c.initial.layout},
        {"radius", c.initial.radius},
        {"spread", c.initial.spread},
        {"min_separation", c.initial.min_separation},
        {"wall_margin", c.initial.wall_margin},
        {"poses", poses}}},
      {"output", {{"dir", c.output.dir}, {"trace", c.output.trace}, {"plot", c.output.plot}}},
  };
}

ExperimentConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config: '" + path + "' is not valid JSON");
  apply_environment(j);
  return from_json(j);
}

void apply_environment(json& j) {
  if (!j.is_object()) return;
  auto env = [](const char* name) -> const char* { return std::getenv(name); };
  auto parse_int = [](const char* name, const char* v) {
    char* end = nullptr;
    errno = 0;
    const long long r = std::strtoll(v, &end, 10);
    if (*v == '\0' || *end != '\0' || errno != 0) throw ConfigError(std::string("config: ") + name + " is not an integer");
    return r;
  };
  auto parse_double = [](const char* name, const char* v) {
    char* end = nullptr;
    const double r = std::strtod(v, &end);
    if (*v == '\0' || *end != '\0') throw ConfigError(std::string("config: ") + name + " is not a number");
    return r;
  };
  if (const char* v = env("SWARMLAB_ROBOTS")) j["robots"] = parse_int("SWARMLAB_ROBOTS", v);
  if (const char* v = env("SWARMLAB_CONTROL_PERIOD_TICKS"))
    j["control_period_ticks"] = parse_int("SWARMLAB_CONTROL_PERIOD_TICKS", v);
  if (const char* v = env("SWARMLAB_SEED")) {
    const auto s = parse_int("SWARMLAB_SEED", v);
    if (s < 0) throw ConfigError("config: SWARMLAB_SEED must be non-negative");
    j["seed"] = static_cast<std::uint64_t>(s);
  }
  if (const char* v = env("SWARMLAB_DURATION")) j["duration"] = parse_double("SWARMLAB_DURATION", v);
  if (const char* v = env("SWARMLAB_DT")) j["dt"] = parse_double("SWARMLAB_DT", v);
  if (const char* v = env("SWARMLAB_FILTER")) {
    const std::string s = v;
    if (s == "on" || s == "true" || s == "1") j["filter"] = true;
    else if (s == "off" || s == "false" || s == "0") j["filter"] = false;
    else throw ConfigError("config: SWARMLAB_FILTER must be on or off");
  }
  if (const char* v = env("SWARMLAB_OUT")) j["output"]["dir"] = std::string(v);
}

// ---------------------------------------------------------------------------

namespace {

struct Placement {
  Bounds area;        // where generated centres may go
  double separation;  // minimum centre distance
};

Placement placement(const ExperimentConfig& c, double default_separation) {
  const bool uni = c.model == "unicycle";
  const double l = uni ? c.abstraction.l : 0.0;
  const double sep = c.initial.min_separation > 0.0 ? c.initial.min_separation : default_separation;
  return {c.safety.bounds.inset(c.robot_radius + 2.0 * l), sep + 4.0 * l};
}

bool separated(const std::vector<dynamics::Pose>& poses, const Vec2& p, double sep) {
  for (const auto& q : poses)
    if ((q.position() - p).norm() < sep) return false;
  return true;
}

void check_layout(const std::vector<dynamics::Pose>& poses, const Placement& pl, const std::string& layout) {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!pl.area.contains(poses[i].position()))
      throw ConfigError("config: '" + layout + "' layout does not fit inside the workspace");
    for (std::size_t j = 0; j < i; ++j)
      if ((poses[i].position() - poses[j].position()).norm() < pl.separation - 1e-12)
        throw ConfigError("config: '" + layout + "' layout places robots closer than the minimum separation");
  }
}

std::vector<dynamics::Pose> sample_disk(const ExperimentConfig& c, const Vec2& center, double radius,
                                        const Placement& pl, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  std::vector<dynamics::Pose> out;
  for (int attempts = 0; static_cast<int>(out.size()) < c.robots; ++attempts) {
    if (attempts > 200000) throw ConfigError("config: cannot place robots with the requested separation");
    const Vec2 offset(unit(rng), unit(rng));
    if (radius > 0.0 && offset.norm() > 1.0) continue;
    Vec2 p = center + radius * offset;
    if (radius == 0.0) p = {pl.area.left + 0.5 * (1.0 + offset.x()) * pl.area.width(),
                            pl.area.bottom + 0.5 * (1.0 + offset.y()) * pl.area.height()};
    if (!pl.area.contains(p) || !separated(out, p, pl.separation)) continue;
    out.push_back({p.x(), p.y(), wrap_angle(heading(rng))});
  }
  return out;
}

}  // namespace

std::vector<dynamics::Pose> initial_poses(const ExperimentConfig& c) {
  const auto& in = c.initial;
  const Vec2 center = c.safety.bounds.center();
  const int n = c.robots;
  std::mt19937_64 rng(c.seed);

  if (in.layout == "explicit") {
    std::vector<dynamics::Pose> out = in.poses;
    for (auto& p : out) p.theta = wrap_angle(p.theta);
    return out;
  }
  if (in.layout == "random") return sample_disk(c, center, 0.0, placement(c, 1.5 * c.safety.ds), rng);
  if (in.layout == "cluster") {
    const auto pl = placement(c, 1.1 * c.safety.ds);
    // The cluster centre is drawn so that the whole disk stays in the arena when possible.
    const Bounds inner = pl.area.inset(in.spread);
    Vec2 cc = center;
    if (inner.left < inner.right && inner.bottom < inner.top) {
      std::uniform_real_distribution<double> ux(inner.left, inner.right), uy(inner.bottom, inner.top);
      const double x = ux(rng);
      cc = {x, uy(rng)};
    }
    return sample_disk(c, cc, in.spread, pl, rng);
  }

  std::vector<dynamics::Pose> out;
  const auto pl = placement(c, c.safety.ds);
  if (in.layout == "circle") {
    for (int i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * i / n;
      const Vec2 p = center + in.radius * Vec2(std::cos(a), std::sin(a));
      out.push_back({p.x(), p.y(), wrap_angle(a + std::numbers::pi)});
    }
  } else {
    // square and wall layouts spread robots evenly along a rectangle's perimeter.
    Bounds r = in.layout == "square" ? Bounds{center.x() - in.radius, center.x() + in.radius,
                                              center.y() - in.radius, center.y() + in.radius}
                                     : pl.area.inset(in.wall_margin);
    if (!(r.left < r.right) || !(r.bottom < r.top))
      throw ConfigError("config: '" + in.layout + "' layout does not fit inside the workspace");
    const double w = r.width(), h = r.height(), perimeter = 2.0 * (w + h);
    for (int i = 0; i < n; ++i) {
      double s = perimeter * i / n;
      Vec2 p;
      double outward = 0.0;
      if (s < w) {
        p = {r.left + s, r.bottom};
        outward = -0.5 * std::numbers::pi;
      } else if ((s -= w) < h) {
        p = {r.right, r.bottom + s};
        outward = 0.0;
      } else if ((s -= h) < w) {
        p = {r.right - s, r.top};
        outward = 0.5 * std::numbers::pi;
      } else {
        s -= w;
        p = {r.left, r.top - s};
        outward = std::numbers::pi;
      }
      const double theta = in.layout == "wall" ? outward : std::atan2(center.y() - p.y(), center.x() - p.x());
      out.push_back({p.x(), p.y(), wrap_angle(theta)});
    }
  }
  check_layout(out, pl, in.layout);
  return out;
}

Points swap_goals(const std::vector<dynamics::Pose>& start, const Bounds& bounds) {
  Points goals;
  goals.reserve(start.size());
  for (const auto& p : start) goals.push_back(2.0 * bounds.center() - p.position());
  return goals;
}

controllers::FormationSpec formation_spec(const ExperimentConfig& c) {
  const auto& k = c.controller;
  const int n = c.robots;
  controllers::FormationSpec spec;
  spec.gain = k.formation_gain;
  std::vector<std::pair<int, int>> edges;
  try {
    if (k.shape == "polygon") {
      // Regular polygon braced by a fan from vertex 0, which makes it rigid.
      auto vertex = [&](int i) {
        const double a = 2.0 * std::numbers::pi * i / n;
        return Vec2(k.scale * std::cos(a), k.scale * std::sin(a));
      };
      for (auto e : Topology::cycle(n).edges) edges.push_back(e);
      for (int i = 2; i + 1 < n; ++i) edges.emplace_back(0, i);
      spec.topology = Topology(n, edges);
      for (auto [i, j] : spec.topology.edges) spec.distances[{i, j}] = (vertex(i) - vertex(j)).norm();
    } else {
      for (const auto& e : k.formation_edges) edges.emplace_back(e.i, e.j);
      spec.topology = Topology(n, edges);
      for (const auto& e : k.formation_edges) {
        const std::pair<int, int> key{std::min(e.i, e.j), std::max(e.i, e.j)};
        if (spec.distances.count(key) && spec.distances[key] != e.distance)
          throw ConfigError("config: conflicting distances for formation edge (" + std::to_string(key.first) + ", " +
                            std::to_string(key.second) + ")");
        spec.distances[key] = e.distance;
      }
    }
    spec.validate(static_cast<std::size_t>(n));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: formation: ") + e.what());
  }
  return spec;
}

Topology consensus_graph(const ExperimentConfig& c) {
  const auto& g = c.controller.graph;
  if (g == "cycle") return Topology::cycle(c.robots);
  if (g == "path") return Topology::path(c.robots);
  if (g == "complete") return Topology::complete(c.robots);
  try {
    return Topology(c.robots, c.controller.edges);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: controller.edges: ") + e.what());
  }
}

std::unique_ptr<controllers::Controller> make_controller(const ExperimentConfig& c,
                                                         const std::vector<dynamics::Pose>& start) {
  using namespace controllers;
  const auto& k = c.controller;
  switch (k.type) {
    case ControllerType::consensus: return std::make_unique<ConsensusController>(consensus_graph(c));
    case ControllerType::formation: return std::make_unique<FormationController>(formation_spec(c));
    case ControllerType::coverage: {
      CoverageParams p{k.kappa, k.mode == "tvd_d1" ? CoverageMode::tvd_d1 : CoverageMode::lloyd, k.resolution};
      return std::make_unique<CoverageController>(p, c.safety.bounds, k.density);
    }
    case ControllerType::swap: {
      // Goals are for the controlled points, which are the centres for single integrators.
      std::vector<dynamics::Pose> points = start;
      if (c.model == "unicycle")
        for (auto& p : points) {
          const Vec2 q = dynamics::uni_to_si_point(p, c.abstraction);
          p.x = q.x();
          p.y = q.y();
        }
      return std::make_unique<GoalController>(swap_goals(points, c.safety.bounds), k.goal_gain, k.circulation,
                                              c.safety.alpha);
    }
    case ControllerType::external: return std::make_unique<ExternalController>(k.command, k.timeout);
    case ControllerType::zero: return std::make_unique<ZeroController>();
    case ControllerType::random:
      return std::make_unique<RandomController>(c.seed ^ 0x9e3779b97f4a7c15ULL, c.safety.alpha);
    case ControllerType::headon: return std::make_unique<HeadOnController>(c.safety.bounds.center(), k.speed);
  }
  throw ConfigError("config: unsupported controller");
}

sim::RunSpec make_run_spec(const ExperimentConfig& c) {
  c.validate();
  sim::RunSpec spec;
  auto& w = spec.world;
  const auto poses = initial_poses(c);
  for (std::size_t i = 0; i < poses.size(); ++i) w.robots.push_back({static_cast<int>(i), poses[i], c.robot_radius});
  w.params = c.safety;
  w.dt = c.dt;
  w.rng_seed = c.seed;
  w.model = c.model == "unicycle" ? sim::Model::unicycle : sim::Model::single_integrator;
  w.abstraction = c.abstraction;
  w.non_penetration = c.non_penetration;
  spec.duration = c.duration;
  spec.control_period_ticks = c.control_period_ticks;
  spec.use_filter = c.filter;
  spec.density = c.controller.density;
  spec.config_snapshot = to_json(c);
  return spec;
}

sim::Trace run(const ExperimentConfig& c) {
  const auto spec = make_run_spec(c);
  std::vector<dynamics::Pose> start;
  for (const auto& r : spec.world.robots) start.push_back(r.pose);
  auto controller = make_controller(c, start);
  return sim::simulate(spec, *controller);
}

sim::Trace run(const ExperimentConfig& c, controllers::Controller& controller) {
  return sim::simulate(make_run_spec(c), controller);
}

}  // namespace swarmlab::config
