#include <chrono>
#include <cmath>
#include <thread>

#include "doctest.h"

#include "swarmlab/server.hpp"

using namespace swarmlab;
using namespace swarmlab::server;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

config::ExperimentConfig coverage_config() {
  config::ExperimentConfig c;
  c.controller.type = config::ControllerType::coverage;
  c.controller.resolution = 64;
  return c;
}

json msg(const std::string& type, json fields = json::object()) {
  fields["v"] = kProtocolVersion;
  fields["type"] = type;
  return fields;
}

bool is_error(const std::optional<json>& reply) { return reply && (*reply)["type"] == "error"; }

// Kernel-weighted count of robots near `p`: grows as robots gather there.
double mass_near(const Session& s, const Vec2& p) {
  const double sigma = s.config().controller.density.sigma;
  double m = 0.0;
  for (const auto& r : s.world().robots)
    m += std::exp(-(r.pose.position() - p).squaredNorm() / (2 * sigma * sigma));
  return m;
}

// Receives messages until one of `type` arrives (or the timeout passes).
std::optional<json> receive_type(Connection& c, const std::string& type, std::chrono::milliseconds timeout = 2000ms) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    auto m = c.receive(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()));
    if (!m) return std::nullopt;
    if ((*m)["type"] == type) return m;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("frames: length prefix, incremental decoding, size limit") {
  const std::string payload = R"({"v":1,"type":"pause"})";
  const auto frame = encode_frame(payload);
  REQUIRE(frame.size() == payload.size() + 4);
  CHECK(static_cast<unsigned char>(frame[3]) == payload.size());
  CHECK(frame[0] == 0);

  FrameDecoder d;
  const std::string two = frame + encode_frame("{}");
  for (char ch : two.substr(0, two.size() - 1)) d.feed(&ch, 1);
  CHECK(d.next() == payload);
  CHECK_FALSE(d.next());
  d.feed(&two.back(), 1);
  CHECK(d.next() == "{}");

  FrameDecoder big;
  const char header[4] = {0x7f, 0, 0, 0};
  big.feed(header, 4);
  CHECK_THROWS_AS(big.next(), std::length_error);
}

TEST_CASE("session: hello and malformed input") {
  Session s(coverage_config());
  const auto hello = s.handle_message(msg("hello", {{"role", "viewer"}}));
  REQUIRE(hello);
  CHECK((*hello)["type"] == "hello");
  CHECK((*hello)["robots"] == 6);

  CHECK(is_error(s.handle_frame("{not json")));
  CHECK(is_error(s.handle_frame("[1,2]")));
  CHECK(is_error(s.handle_message({{"type", "pause"}})));               // no version
  CHECK(is_error(s.handle_message({{"v", 2}, {"type", "pause"}})));     // wrong version
  CHECK(is_error(s.handle_message(msg("teleport"))));
  CHECK(is_error(s.handle_message(msg("cursor_add", {{"id", 1}, {"x", 5.0}, {"y", 0.0}}))));
  CHECK(is_error(s.handle_message(msg("cursor_update", {{"id", 9}, {"x", 0.0}, {"y", 0.0}}))));
  CHECK(is_error(s.handle_message(msg("cursor_remove", {{"id", 9}}))));
  CHECK(s.refs().empty());
  CHECK_FALSE(s.paused());
}

TEST_CASE("session: cursors become density kernels") {
  Session s(coverage_config());
  REQUIRE_FALSE(s.handle_message(msg("cursor_add", {{"id", 3}, {"x", 0.2}, {"y", 0.1}, {"w", 2.0}})));
  const auto f = s.density();
  CHECK(geometry::density_at(f, {0.2, 0.1}, s.time()) == doctest::Approx(f.floor + 2.0));
  const auto state = s.state_message();
  REQUIRE(state["density_refs"].size() == 1);
  CHECK(state["density_refs"][0]["id"] == 3);
  CHECK(state["density_refs"][0]["x"] == 0.2);

  CHECK(is_error(s.handle_message(msg("cursor_add", {{"id", 3}, {"x", 0.0}, {"y", 0.0}}))));
  s.handle_message(msg("cursor_update", {{"id", 3}, {"x", -0.1}, {"y", -0.1}}));
  s.handle_message(msg("cursor_update", {{"id", 3}, {"x", -0.2}, {"y", 0.3}}));
  CHECK(s.state_message()["density_refs"][0]["x"] == -0.2);
  CHECK(s.refs().at(3).weight == 2.0);
  s.handle_message(msg("cursor_remove", {{"id", 3}}));
  CHECK(s.state_message()["density_refs"].empty());
}

TEST_CASE("session: cursor messages for distinct ids commute") {
  Session a(coverage_config()), b(coverage_config());
  const auto m1 = msg("cursor_add", {{"id", 1}, {"x", 0.1}, {"y", 0.1}});
  const auto m2 = msg("cursor_add", {{"id", 2}, {"x", -0.3}, {"y", 0.2}});
  a.handle_message(m1);
  a.handle_message(m2);
  b.handle_message(m2);
  b.handle_message(m1);
  CHECK(a.refs() == b.refs());
  for (int k = 0; k < 20; ++k) {
    a.tick();
    b.tick();
  }
  CHECK(a.state_message() == b.state_message());
}

TEST_CASE("session: parameter changes are validated and deferred") {
  Session s(coverage_config());
  const double ds = s.config().safety.ds;
  const auto reply = s.handle_message(msg("set_param", {{"name", "ds"}, {"value", -1.0}}));
  REQUIRE(is_error(reply));
  CHECK((*reply)["reason"].get<std::string>().find("valid range") != std::string::npos);
  CHECK(s.config().safety.ds == ds);
  CHECK(is_error(s.handle_message(msg("set_param", {{"name", "mass"}, {"value", 1.0}}))));
  CHECK(is_error(s.handle_message(msg("set_param", {{"name", "gamma"}, {"value", "fast"}}))));

  s.tick();  // tick 0 -> 1, inside a control period
  REQUIRE_FALSE(s.handle_message(msg("set_param", {{"name", "ds"}, {"value", 0.1}})));
  REQUIRE_FALSE(s.handle_message(msg("set_param", {{"name", "kappa"}, {"value", 2.0}})));
  s.tick();
  CHECK(s.config().safety.ds == ds);
  while (s.ticks() % s.config().control_period_ticks != 0) s.tick();
  s.tick();  // first tick of the next period applies the change
  CHECK(s.config().safety.ds == 0.1);
  CHECK(s.config().controller.kappa == 2.0);
  CHECK(s.state_message()["params"]["ds"] == 0.1);
  for (const auto& [name, range] : s.param_ranges()) CHECK(range.lo < range.hi);
}

TEST_CASE("session: pause freezes the simulation") {
  Session s(coverage_config());
  for (int k = 0; k < 7; ++k) s.tick();
  s.handle_message(msg("pause"));
  const auto before = s.state_message();
  for (int k = 0; k < 50; ++k) s.tick();
  CHECK(s.ticks() == 7);
  CHECK(s.state_message()["robots"] == before["robots"]);
  CHECK(s.state_message()["status"] == "paused");
  s.handle_message(msg("resume"));
  s.tick();
  CHECK(s.ticks() == 8);
}

TEST_CASE("session: a cursor pulls the team toward it") {
  Session s(coverage_config());
  const Vec2 cursor(0.35, 0.35);
  for (int k = 0; k < 100; ++k) s.tick();
  const double before = mass_near(s, cursor);
  s.handle_message(msg("cursor_add", {{"id", 1}, {"x", cursor.x()}, {"y", cursor.y()}, {"w", 5.0}}));
  for (int k = 0; k < 100; ++k) s.tick();  // one simulated second
  CHECK(mass_near(s, cursor) > before);
  CHECK(s.score_so_far() == 1.0);
}

TEST_CASE("server: broadcast rate, round trip and robustness") {
  Server srv(Session(coverage_config()), {"127.0.0.1", 0, 20.0, 1.0});
  srv.start();
  REQUIRE(srv.port() > 0);

  Connection c("127.0.0.1", srv.port());
  c.send(msg("hello", {{"role", "viewer"}}));
  REQUIRE(receive_type(c, "hello"));

  SUBCASE("20 Hz for two seconds") {
    REQUIRE(receive_type(c, "state"));
    const auto start = std::chrono::steady_clock::now();
    int states = 0;
    while (std::chrono::steady_clock::now() - start < 2s) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(2s - (std::chrono::steady_clock::now() - start));
      const auto m = c.receive(std::max(left, 1ms));
      if (m && (*m)["type"] == "state") ++states;
    }
    CHECK(states >= 39);
    CHECK(states <= 41);
  }
  SUBCASE("cursor round trip") {
    c.send(msg("cursor_add", {{"id", 7}, {"x", 0.2}, {"y", 0.1}}));
    bool seen = false;
    for (int k = 0; k < 10 && !seen; ++k) {
      const auto s = receive_type(c, "state");
      REQUIRE(s);
      for (const auto& r : (*s)["density_refs"]) seen = seen || (r["id"] == 7 && r["x"] == 0.2);
    }
    CHECK(seen);
  }
  SUBCASE("malformed frame gets an error and the session continues") {
    c.send_raw("this is not json");
    const auto e = receive_type(c, "error");
    REQUIRE(e);
    CHECK((*e)["v"] == kProtocolVersion);
    const auto s1 = receive_type(c, "state");
    const auto s2 = receive_type(c, "state");
    REQUIRE(s1);
    REQUIRE(s2);
    CHECK((*s2)["tick"].get<int>() > (*s1)["tick"].get<int>());
  }
  SUBCASE("paused sessions send heartbeats") {
    c.send(msg("pause"));
    std::optional<json> s;
    do s = receive_type(c, "state");
    while (s && (*s)["status"] != "paused");
    REQUIRE(s);
    const auto next = receive_type(c, "state");
    REQUIRE(next);
    CHECK((*next)["tick"] == (*s)["tick"]);
    CHECK((*next)["robots"] == (*s)["robots"]);
  }
  CHECK(srv.clients() == 1);
  srv.stop();
}

TEST_CASE("server: runs with no clients and refuses a taken port") {
  Server srv(Session(coverage_config()), {"127.0.0.1", 0, 20.0, 4.0});
  srv.start();
  std::this_thread::sleep_for(500ms);
  CHECK(srv.ticks() > 50);
  CHECK(srv.clients() == 0);

  Server clash(Session(coverage_config()), {"127.0.0.1", srv.port(), 20.0, 1.0});
  CHECK_THROWS_AS(clash.start(), std::runtime_error);
  srv.stop();
}
