#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"

#include "swarmlab/config.hpp"
#include "swarmlab/experiment.hpp"
#include "swarmlab/sim.hpp"

using namespace swarmlab;
using namespace swarmlab::sim;
using doctest::Approx;

namespace {

World world_of(const Points& x, double radius = 0.02) {
  World w;
  for (std::size_t i = 0; i < x.size(); ++i)
    w.robots.push_back({static_cast<int>(i), {x[i].x(), x[i].y(), 0.0}, radius});
  return w;
}

double min_distance(const World& w) {
  double d = 1e9;
  for (std::size_t i = 0; i < w.robots.size(); ++i)
    for (std::size_t j = i + 1; j < w.robots.size(); ++j)
      d = std::min(d, (w.robots[i].pose.position() - w.robots[j].pose.position()).norm());
  return d;
}

Trace synthetic_trace(int robots, int ticks) {
  Trace t;
  t.robots = robots;
  t.dt = 0.01;
  t.ticks.resize(static_cast<std::size_t>(ticks));
  for (int k = 0; k < ticks; ++k) {
    t.ticks[static_cast<std::size_t>(k)].tick = k + 1;
    t.ticks[static_cast<std::size_t>(k)].t = (k + 1) * 0.01;
  }
  return t;
}

struct Throwing final : controllers::Controller {
  int calls = 0;
  Commands compute(const controllers::ControlInput& in) override {
    if (++calls > 3) throw std::runtime_error("controller exploded");
    return Commands(in.positions.size(), Vec2::Zero());
  }
  std::string_view name() const override { return "throwing"; }
};

struct NonFinite final : controllers::Controller {
  Commands compute(const controllers::ControlInput& in) override {
    return Commands(in.positions.size(), Vec2(std::nan(""), 0.0));
  }
  std::string_view name() const override { return "nan"; }
};

}  // namespace

TEST_CASE("narrow phase contacts") {
  const double eps = 1e-6;
  CHECK(detect_collisions(world_of({{0, 0}, {0.04 + eps, 0}})).empty());
  const auto c = detect_collisions(world_of({{0, 0}, {0, 0.04 - eps}}));
  REQUIRE(c.size() == 1);
  CHECK(c[0].i == 0);
  CHECK(c[0].j == 1);
  CHECK(c[0].depth == Approx(eps).epsilon(1e-6));
  CHECK(c[0].normal.isApprox(Vec2(0, 1)));

  const auto wall = detect_collisions(world_of({{0.59, 0.0}}));
  REQUIRE(wall.size() == 1);
  CHECK(wall[0].j == wall_right);
  CHECK(wall[0].depth == Approx(0.01));
  CHECK(wall[0].normal.isApprox(Vec2(1, 0)));
  CHECK(wall_name(wall_top) == "top");
}

TEST_CASE("broad phase finds every overlapping pair") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-0.55, 0.55);
  for (int trial = 0; trial < 20; ++trial) {
    Points x;
    for (int i = 0; i < 40; ++i) x.emplace_back(u(rng), u(rng));
    const auto w = world_of(x, 0.04);
    std::size_t expected = 0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = i + 1; j < x.size(); ++j)
        if ((x[i] - x[j]).norm() < 0.08) ++expected;
    std::size_t pairs = 0;
    for (const auto& c : detect_collisions(w)) pairs += c.j >= 0;
    CHECK(pairs == expected);
  }
}

TEST_CASE("non-penetration resolution") {
  SUBCASE("symmetric pair moves half the depth each") {
    const double eps = 0.01;
    auto w = world_of({{-0.015, 0.0}, {0.015, 0.0}});
    const auto report = resolve_nonpenetration(w, detect_collisions(w));
    CHECK(report.resolved);
    CHECK(w.robots[0].pose.x == Approx(-0.015 - eps / 2));
    CHECK(w.robots[1].pose.x == Approx(0.015 + eps / 2));
  }
  SUBCASE("no contacts leaves the world unchanged") {
    auto w = world_of({{0, 0}, {0.3, 0.1}});
    const auto before = w.robots;
    resolve_nonpenetration(w, {});
    CHECK(w.robots == before);
  }
  SUBCASE("corner pin satisfies both walls") {
    auto w = world_of({{0.595, 0.595}});
    CHECK(resolve_nonpenetration(w, detect_collisions(w)).resolved);
    CHECK(w.robots[0].pose.x == Approx(0.58));
    CHECK(w.robots[0].pose.y == Approx(0.58));
    CHECK(detect_collisions(w).empty());
  }
  SUBCASE("resolution does not deepen overlaps") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (int trial = 0; trial < 50; ++trial) {
      Points x;
      for (int i = 0; i < 12; ++i) x.emplace_back(u(rng), u(rng));
      auto w = world_of(x, 0.05);
      const auto contacts = detect_collisions(w);
      double before = 0.0;
      for (const auto& c : contacts) before = std::max(before, c.depth);
      resolve_nonpenetration(w, contacts);
      double after = 0.0;
      for (const auto& c : detect_collisions(w)) after = std::max(after, c.depth);
      CHECK(after <= before + 1e-9);
    }
  }
}

TEST_CASE("step examples") {
  SUBCASE("zero commands advance time only") {
    auto w = world_of({{0, 0}, {0.3, 0.2}});
    const auto before = w.robots;
    const auto rec = step(w, Commands(2, Vec2::Zero()), true);
    CHECK(w.robots == before);
    CHECK(w.tick == 1);
    CHECK(w.t == Approx(0.01));
    CHECK(rec.contacts.empty());
  }
  SUBCASE("filtered head-on commands keep the safety distance") {
    auto w = world_of({{-0.3, 0.0}, {0.3, 0.0}});
    for (int k = 0; k < 1000; ++k) {
      const auto rec = step(w, {Vec2(0.1, 0.0), Vec2(-0.1, 0.0)}, true);
      CHECK(rec.contacts.empty());
      REQUIRE(min_distance(w) >= w.params.ds - 1e-6);
    }
  }
  SUBCASE("unfiltered head-on commands collide") {
    auto w = world_of({{-0.3, 0.0}, {0.3, 0.0}});
    Trace trace;
    for (int k = 0; k < 400; ++k) step(w, {Vec2(0.1, 0.0), Vec2(-0.1, 0.0)}, false);
    flush_contacts(w, trace);
    REQUIRE_FALSE(trace.events.empty());
    CHECK(trace.events[0].i == 0);
    CHECK(trace.events[0].j == 1);
    CHECK(trace.events[0].normal_speed == Approx(0.2));
    CHECK(trace.events[0].t == Approx(2.8).epsilon(0.01));
    CHECK(trace.events[0].commanded_i.isApprox(Vec2(0.1, 0.0)));
    CHECK(min_distance(w) >= 0.04 - 1e-9);
  }
  SUBCASE("unfiltered commands are clamped to the box") {
    auto w = world_of({{0, 0}});
    const auto rec = step(w, {Vec2(0.5, -0.05)}, false);
    CHECK(rec.u_star[0].isApprox(Vec2(0.1, -0.05)));
  }
  SUBCASE("non-finite commands are rejected and the world is untouched") {
    auto w = world_of({{0, 0}});
    const auto before = w.robots;
    CHECK_THROWS_AS(step(w, {Vec2(std::nan(""), 0.0)}, true), InputDomainError);
    CHECK_THROWS_AS(step(w, {Vec2::Zero(), Vec2::Zero()}, true), InputDomainError);
    CHECK(w.robots == before);
    CHECK(w.tick == 0);
  }
}

TEST_CASE("safety score endpoints and the worked example") {
  safety::SafetyParams p;
  auto clean = synthetic_trace(2, 100);
  CHECK(safety_score(clean, p).score == 1.0);

  auto one = synthetic_trace(2, 100);
  one.ticks[10].contacts.push_back({0, 1, p.alpha});
  one.events.push_back({0.11, 0, 1, p.alpha, 0.01});
  const auto r = safety_score(one, p);
  CHECK(r.score == Approx(0.995));
  CHECK(r.mean_collision_velocity == Approx(p.alpha));
  CHECK(r.mean_contact_duration == Approx(0.01));

  auto worst = synthetic_trace(3, 50);
  for (auto& tick : worst.ticks)
    for (int i = 0; i < 3; ++i) tick.contacts.push_back({i, wall_left, p.alpha});
  CHECK(safety_score(worst, p).score == 0.0);

  CHECK_THROWS_AS(safety_score(synthetic_trace(2, 0), p), InputDomainError);
}

TEST_CASE("appending a contact lowers the score") {
  safety::SafetyParams p;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> speed(1e-4, 0.2);
  std::uniform_int_distribution<int> tick(0, 199);
  auto t = synthetic_trace(4, 200);
  double s = safety_score(t, p).score;
  for (int k = 0; k < 50; ++k) {
    t.ticks[static_cast<std::size_t>(tick(rng))].contacts.push_back({0, 1, speed(rng)});
    const double next = safety_score(t, p).score;
    CHECK(next >= 0.0);
    CHECK(next <= 1.0);
    if (s > 0.0) CHECK(next < s);
    s = next;
  }
}

TEST_CASE("runs are deterministic and recorded per tick") {
  auto c = experiment::demo_config("coverage");
  c.duration = 2.0;
  const auto a = config::run(c);
  const auto b = config::run(c);
  CHECK(a == b);
  REQUIRE(a.ticks.size() == 200);
  for (std::size_t k = 0; k < a.ticks.size(); ++k) CHECK(a.ticks[k].t == Approx(0.01 * (k + 1)));
  CHECK(a.config == config::to_json(c));
}

TEST_CASE("zero-duration run keeps the configuration snapshot") {
  auto c = experiment::demo_config("consensus");
  c.duration = 0.0;
  const auto t = config::run(c);
  CHECK(t.ticks.empty());
  CHECK(t.status == "complete");
  CHECK(t.config == config::to_json(c));
  CHECK(t.initial.size() == static_cast<std::size_t>(c.robots));
}

TEST_CASE("consensus on the six-cycle contracts within 30 s") {
  auto c = experiment::demo_config("consensus");
  c.robots = 6;
  c.controller.graph = "cycle";
  const auto t = config::run(c);
  REQUIRE(t.status == "complete");
  CHECK(experiment::max_pairwise_distance(t.ticks.back().poses) < 1e-2);
}

TEST_CASE("controller failures truncate the trace") {
  auto c = experiment::demo_config("consensus");
  c.duration = 1.0;
  Throwing thrower;
  const auto t = config::run(c, thrower);
  CHECK(t.status == "error");
  CHECK(t.error.find("controller exploded") != std::string::npos);
  CHECK(t.ticks.size() == 3 * static_cast<std::size_t>(c.control_period_ticks));

  NonFinite nan;
  const auto u = config::run(c, nan);
  CHECK(u.status == "error");
  CHECK(u.ticks.empty());
}

TEST_CASE("filtered adversarial streams never make contact") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    config::ExperimentConfig c;
    c.robots = 8;
    c.seed = seed;
    c.duration = 20.0;
    c.controller.type = config::ControllerType::random;
    const auto t = config::run(c);
    REQUIRE(t.status == "complete");
    CHECK(t.events.empty());
    for (const auto& tick : t.ticks) REQUIRE(experiment::min_pairwise_distance(tick.poses) >= c.safety.ds - 1e-6);
  }
}

TEST_CASE("unicycle runs keep bodies apart under the filter") {
  config::ExperimentConfig c;
  c.robots = 6;
  c.model = "unicycle";
  c.duration = 10.0;
  c.controller.type = config::ControllerType::random;
  const auto t = config::run(c);
  REQUIRE(t.status == "complete");
  CHECK(t.events.empty());
}
