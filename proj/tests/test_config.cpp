#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"

#include "swarmlab/config.hpp"

using namespace swarmlab;
using namespace swarmlab::config;
using nlohmann::json;

namespace {

json defaults() { return to_json(ExperimentConfig{}); }

// Sets an environment variable for the lifetime of the guard.
struct EnvGuard {
  std::string name;
  EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
  ~EnvGuard() { ::unsetenv(name.c_str()); }
};

double min_separation(const std::vector<dynamics::Pose>& p) {
  double d = 1e9;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) d = std::min(d, (p[i].position() - p[j].position()).norm());
  return d;
}

}  // namespace

TEST_CASE("configuration round trip is the identity") {
  ExperimentConfig c;
  c.robots = 3;
  c.seed = 99;
  c.filter = false;
  c.controller.type = ControllerType::coverage;
  c.controller.density.refs.push_back({4, {0.1, -0.2}, 0.7});
  c.controller.edges = {{0, 1}, {1, 2}};
  c.controller.formation_edges = {{0, 1, 0.3}};
  c.initial.layout = "explicit";
  c.initial.poses = {{0, 0, 0.5}, {0.3, 0.1, 0}, {-0.3, 0.2, -1}};
  c.output.dir = "somewhere/else";
  const auto j = to_json(c);
  CHECK(from_json(j) == c);
  CHECK(to_json(from_json(j)) == j);
  CHECK(from_json(json::parse(j.dump())) == c);
  CHECK(from_json(defaults()) == ExperimentConfig{});
  CHECK(from_json(json::object()) == ExperimentConfig{});
}

TEST_CASE("unknown keys are rejected at every level") {
  for (const char* path : {"/bogus", "/safety/bogus", "/controller/bogus", "/initial/bogus", "/output/bogus",
                           "/safety/bounds/bogus"}) {
    auto j = defaults();
    j[json::json_pointer(path)] = 1;
    CHECK_THROWS_AS(from_json(j), ConfigError);
  }
  auto j = defaults();
  j["controller"]["density"]["refs"] = json::array({{{"id", 1}, {"x", 0}, {"y", 0}, {"w", 1}, {"z", 0}}});
  CHECK_THROWS_AS(from_json(j), ConfigError);
}

TEST_CASE("invariants are enforced at load") {
  auto bad = [](const char* path, json value) {
    auto j = defaults();
    j[json::json_pointer(path)] = std::move(value);
    return j;
  };
  CHECK_THROWS_AS(from_json(bad("/robots", 0)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/dt", -0.01)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/duration", -1)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/control_period_ticks", 0)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/safety/ds", -1)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/safety/ds", 0.03)), ConfigError);  // below two body radii
  CHECK_THROWS_AS(from_json(bad("/safety/gamma", 0)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/controller/type", "teleport")), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/controller/kappa", 0)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/controller/resolution", 8)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/controller/density/floor", 0)), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/model", "hovercraft")), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/initial/layout", "spiral")), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/robots", "six")), ConfigError);
  CHECK_THROWS_AS(from_json(bad("/controller/graph", "star")), ConfigError);

  auto edges = defaults();
  edges["controller"]["graph"] = "explicit";
  edges["controller"]["edges"] = json::array({json::array({0, 9})});
  CHECK_THROWS(from_json(edges));

  auto ext = defaults();
  ext["controller"]["type"] = "external";
  CHECK_THROWS_AS(from_json(ext), ConfigError);  // empty command

  auto poses = defaults();
  poses["robots"] = 2;
  poses["initial"]["layout"] = "explicit";
  poses["initial"]["poses"] = json::array({json::array({0, 0}), json::array({2, 0})});
  CHECK_THROWS_AS(from_json(poses), ConfigError);
}

TEST_CASE("errors carry a config prefix") {
  auto j = defaults();
  j["bogus"] = 1;
  try {
    from_json(j);
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("config: ", 0) == 0);
    CHECK(std::string(e.what()).find("bogus") != std::string::npos);
  }
}

TEST_CASE("environment overrides") {
  auto j = defaults();
  {
    EnvGuard a("SWARMLAB_ROBOTS", "9");
    EnvGuard b("SWARMLAB_FILTER", "off");
    EnvGuard c("SWARMLAB_DURATION", "2.5");
    EnvGuard d("SWARMLAB_SEED", "17");
    EnvGuard e("SWARMLAB_OUT", "elsewhere");
    apply_environment(j);
  }
  const auto c = from_json(j);
  CHECK(c.robots == 9);
  CHECK_FALSE(c.filter);
  CHECK(c.duration == 2.5);
  CHECK(c.seed == 17);
  CHECK(c.output.dir == "elsewhere");

  EnvGuard bad("SWARMLAB_ROBOTS", "many");
  auto k = defaults();
  CHECK_THROWS_AS(apply_environment(k), ConfigError);
}

TEST_CASE("load_file reads JSON and applies the environment") {
  const auto path = std::filesystem::temp_directory_path() / "swarmlab_test_config.json";
  {
    std::ofstream out(path);
    out << R"({"robots": 4, "controller": {"type": "zero"}})";
  }
  EnvGuard g("SWARMLAB_DURATION", "3");
  const auto c = load_file(path.string());
  CHECK(c.robots == 4);
  CHECK(c.controller.type == ControllerType::zero);
  CHECK(c.duration == 3.0);
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_file(path.string()), ConfigError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_file(path.string()), ConfigError);
}

TEST_CASE("generated layouts fit the workspace and keep their spacing") {
  for (const char* layout : {"random", "cluster", "circle", "square", "wall"}) {
    CAPTURE(layout);
    for (int robots : {2, 6, 10}) {
      ExperimentConfig c;
      c.robots = robots;
      c.initial.layout = layout;
      const auto p = initial_poses(c);
      REQUIRE(p.size() == static_cast<std::size_t>(robots));
      for (const auto& q : p) CHECK(c.safety.bounds.inset(c.robot_radius).contains(q.position()));
      CHECK(min_separation(p) > c.safety.ds);
      CHECK(initial_poses(c) == p);
    }
  }
  ExperimentConfig a, b;
  b.seed = 2;
  CHECK(initial_poses(a) != initial_poses(b));
}

TEST_CASE("swap goals reflect through the centre") {
  const std::vector<dynamics::Pose> start{{0.4, 0.4, 0}, {-0.4, 0.1, 0}};
  const auto g = swap_goals(start, Bounds{});
  CHECK(g[0].isApprox(Vec2(-0.4, -0.4)));
  CHECK(g[1].isApprox(Vec2(0.4, -0.1)));
}

TEST_CASE("controller construction") {
  ExperimentConfig c;
  for (auto t : {ControllerType::consensus, ControllerType::formation, ControllerType::coverage, ControllerType::swap,
                 ControllerType::zero, ControllerType::random, ControllerType::headon}) {
    c.controller.type = t;
    const auto ctl = make_controller(c, initial_poses(c));
    REQUIRE(ctl);
    CHECK(controller_type_from_string(to_string(t)) == t);
  }
  c.controller.type = ControllerType::external;
  c.controller.command = {"/nonexistent/controller"};
  CHECK_THROWS_AS(make_controller(c, initial_poses(c)), ConfigError);

  c.controller.type = ControllerType::formation;
  const auto spec = formation_spec(c);
  CHECK(spec.topology.edges.size() == 2 * static_cast<std::size_t>(c.robots) - 3);
  CHECK(consensus_graph(c) == Topology::cycle(c.robots));
}
