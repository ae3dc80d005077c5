#include "swarmlab/trace_io.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace swarmlab::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

namespace {

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }

json commands_json(const Commands& u) {
  json out = json::array();
  for (const auto& ui : u) out.push_back(vec_json(ui));
  return out;
}

json poses_json(const std::vector<dynamics::Pose>& poses) {
  json out = json::array();
  for (const auto& p : poses) out.push_back({p.x, p.y, p.theta});
  return out;
}

}  // namespace

json tick_json(const sim::TickRecord& tick) {
  json contacts = json::array();
  for (const auto& c : tick.contacts) contacts.push_back({{"i", c.i}, {"j", c.j}, {"normal_speed", c.normal_speed}});
  return {{"type", "tick"},
          {"tick", tick.tick},
          {"t", tick.t},
          {"poses", poses_json(tick.poses)},
          {"u_hat", commands_json(tick.u_hat)},
          {"u_star", commands_json(tick.u_star)},
          {"filtered", tick.filtered},
          {"filter_status", qp::to_string(tick.filter_status)},
          {"unsafe_state", tick.unsafe_state},
          {"contacts", contacts},
          {"penetration_unresolved", tick.penetration_unresolved}};
}

json event_json(const sim::ContactEvent& e) {
  json j = {{"type", "contact"},     {"t", e.t},
            {"i", e.i},              {"j", e.j},
            {"normal_speed", e.normal_speed}, {"duration", e.duration},
            {"commanded_i", vec_json(e.commanded_i)}};
  if (e.j >= 0) j["commanded_j"] = vec_json(e.commanded_j);
  else j["wall"] = sim::wall_name(e.j);
  return j;
}

void write_jsonl(const sim::Trace& trace, std::ostream& out) {
  out << json{{"type", "header"},
              {"robots", trace.robots},
              {"dt", trace.dt},
              {"initial", poses_json(trace.initial)},
              {"config", trace.config}}
             .dump()
      << '\n';
  for (const auto& t : trace.ticks) out << tick_json(t).dump() << '\n';
  for (const auto& e : trace.events) out << event_json(e).dump() << '\n';
  out << json{{"type", "end"},
              {"status", trace.status},
              {"error", trace.error},
              {"ticks", trace.ticks.size()},
              {"diagnostics", trace.diagnostics}}
             .dump()
      << '\n';
}

void write_csv(const sim::Trace& trace, std::ostream& out) {
  out << "t,id,x,y,theta,ux_hat,uy_hat,ux_star,uy_star\n";
  for (const auto& t : trace.ticks) {
    for (std::size_t i = 0; i < t.poses.size(); ++i) {
      const auto& p = t.poses[i];
      out << format_double(t.t) << ',' << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ','
          << format_double(p.theta) << ',' << format_double(t.u_hat[i].x()) << ',' << format_double(t.u_hat[i].y())
          << ',' << format_double(t.u_star[i].x()) << ',' << format_double(t.u_star[i].y()) << '\n';
    }
  }
}

void write_contacts_csv(const sim::Trace& trace, std::ostream& out) {
  out << "t,i,j,normal_speed,duration,ux_i,uy_i,ux_j,uy_j\n";
  for (const auto& e : trace.events)
    out << format_double(e.t) << ',' << e.i << ',' << e.j << ',' << format_double(e.normal_speed) << ','
        << format_double(e.duration) << ',' << format_double(e.commanded_i.x()) << ','
        << format_double(e.commanded_i.y()) << ',' << format_double(e.commanded_j.x()) << ','
        << format_double(e.commanded_j.y()) << '\n';
}

void write_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace swarmlab::io
