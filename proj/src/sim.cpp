#include "swarmlab/sim.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace swarmlab::sim {

std::string wall_name(int wall) {
  switch (wall) {
    case wall_left: return "left";
    case wall_right: return "right";
    case wall_bottom: return "bottom";
    case wall_top: return "top";
    default: return "robot";
  }
}

void World::validate() const {
  params.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("world: dt must be positive");
  std::set<int> ids;
  for (const auto& r : robots) {
    if (!(r.radius > 0.0)) throw ParameterError("world: robot radius must be positive");
    if (!ids.insert(r.id).second) throw ParameterError("world: duplicate robot id " + std::to_string(r.id));
    if (!std::isfinite(r.pose.x) || !std::isfinite(r.pose.y) || !std::isfinite(r.pose.theta))
      throw InputDomainError("world: non-finite robot pose");
  }
  if (model == Model::unicycle) abstraction.validate();
  certificate_params().validate();
}

Points World::positions() const {
  Points out;
  out.reserve(robots.size());
  for (const auto& r : robots) out.push_back(r.pose.position());
  return out;
}

double World::max_radius() const {
  double m = 0.0;
  for (const auto& r : robots) m = std::max(m, r.radius);
  return m;
}

Points World::certificate_points() const {
  if (model == Model::single_integrator) return positions();
  Points out;
  out.reserve(robots.size());
  for (const auto& r : robots) out.push_back(dynamics::uni_to_si_point(r.pose, abstraction));
  return out;
}

safety::SafetyParams World::certificate_params() const {
  safety::SafetyParams p = params;
  double margin = max_radius();
  if (model == Model::unicycle) {
    p.ds += 2.0 * abstraction.l;
    margin += abstraction.l;
  }
  p.bounds = params.bounds.inset(margin);
  return p;
}

namespace {

constexpr int kWalls[4] = {wall_left, wall_right, wall_bottom, wall_top};

Vec2 wall_normal(int wall) {
  switch (wall) {
    case wall_left: return {-1.0, 0.0};
    case wall_right: return {1.0, 0.0};
    case wall_bottom: return {0.0, -1.0};
    default: return {0.0, 1.0};
  }
}

// Distance from the centre to a wall, positive inside the arena.
double wall_clearance(const Vec2& p, int wall, const Bounds& b) {
  switch (wall) {
    case wall_left: return p.x() - b.left;
    case wall_right: return b.right - p.x();
    case wall_bottom: return p.y() - b.bottom;
    default: return b.top - p.y();
  }
}

std::optional<Contact> pair_contact(const World& w, int i, int j) {
  const auto& a = w.robots[static_cast<std::size_t>(i)];
  const auto& b = w.robots[static_cast<std::size_t>(j)];
  const Vec2 d = b.pose.position() - a.pose.position();
  const double reach = a.radius + b.radius;
  const double dist_sq = d.squaredNorm();
  if (dist_sq >= reach * reach) return std::nullopt;
  const double dist = std::sqrt(dist_sq);
  Contact c;
  c.i = i;
  c.j = j;
  c.depth = reach - dist;
  c.normal = dist > 0.0 ? Vec2(d / dist) : Vec2::UnitX();
  return c;
}

std::optional<Contact> wall_contact(const World& w, int i, int wall) {
  const auto& r = w.robots[static_cast<std::size_t>(i)];
  const double clearance = wall_clearance(r.pose.position(), wall, w.params.bounds);
  if (clearance >= r.radius) return std::nullopt;
  return Contact{i, wall, r.radius - clearance, wall_normal(wall)};
}

void translate(RobotState& r, const Vec2& delta) {
  r.pose.x += delta.x();
  r.pose.y += delta.y();
}

}  // namespace

std::vector<Contact> detect_collisions(const World& world) {
  const int n = static_cast<int>(world.robots.size());
  std::vector<Contact> out;
  if (n == 0) return out;

  // Broad phase: bucket every robot's bounding box into a uniform hash.
  const double cell = std::max(2.0 * world.max_radius(), 1e-9);
  std::vector<std::pair<std::int64_t, int>> buckets;
  auto key = [](std::int64_t cx, std::int64_t cy) { return (cx << 32) ^ (cy & 0xffffffffLL); };
  for (int i = 0; i < n; ++i) {
    const auto& r = world.robots[static_cast<std::size_t>(i)];
    const auto x0 = static_cast<std::int64_t>(std::floor((r.pose.x - r.radius) / cell));
    const auto x1 = static_cast<std::int64_t>(std::floor((r.pose.x + r.radius) / cell));
    const auto y0 = static_cast<std::int64_t>(std::floor((r.pose.y - r.radius) / cell));
    const auto y1 = static_cast<std::int64_t>(std::floor((r.pose.y + r.radius) / cell));
    for (auto cx = x0; cx <= x1; ++cx)
      for (auto cy = y0; cy <= y1; ++cy) buckets.emplace_back(key(cx, cy), i);
  }
  std::sort(buckets.begin(), buckets.end());
  std::vector<std::pair<int, int>> candidates;
  for (std::size_t s = 0; s < buckets.size();) {
    std::size_t e = s;
    while (e < buckets.size() && buckets[e].first == buckets[s].first) ++e;
    for (std::size_t a = s; a < e; ++a)
      for (std::size_t b = a + 1; b < e; ++b) candidates.emplace_back(buckets[a].second, buckets[b].second);
    s = e;
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Narrow phase.
  for (auto [i, j] : candidates)
    if (auto c = pair_contact(world, i, j)) out.push_back(*c);
  for (int i = 0; i < n; ++i) {
    const auto& r = world.robots[static_cast<std::size_t>(i)];
    for (int wall : kWalls) {
      if (wall_clearance(r.pose.position(), wall, world.params.bounds) > r.radius) continue;  // outside the band
      if (auto c = wall_contact(world, i, wall)) out.push_back(*c);
    }
  }
  std::sort(out.begin(), out.end(), [](const Contact& a, const Contact& b) {
    return a.i != b.i ? a.i < b.i : a.j < b.j;
  });
  return out;
}

ResolveReport resolve_nonpenetration(World& world, const std::vector<Contact>& contacts, int max_passes,
                                     double tolerance) {
  ResolveReport report;
  std::vector<Contact> current = contacts;
  for (int pass = 0; pass < max_passes; ++pass) {
    double worst = 0.0;
    for (const auto& c : current) worst = std::max(worst, c.depth);
    if (worst < tolerance) break;
    for (const auto& c : current) {
      // Re-evaluate against positions already moved in this pass.
      const auto fresh = c.j >= 0 ? pair_contact(world, c.i, c.j) : wall_contact(world, c.i, c.j);
      if (!fresh || fresh->depth <= 0.0) continue;
      if (c.j >= 0) {
        translate(world.robots[static_cast<std::size_t>(c.i)], -0.5 * fresh->depth * fresh->normal);
        translate(world.robots[static_cast<std::size_t>(c.j)], 0.5 * fresh->depth * fresh->normal);
      } else {
        translate(world.robots[static_cast<std::size_t>(c.i)], -fresh->depth * fresh->normal);
      }
    }
    report.passes = pass + 1;
    current = detect_collisions(world);
  }
  report.max_depth = 0.0;
  for (const auto& c : current) report.max_depth = std::max(report.max_depth, c.depth);
  report.resolved = report.max_depth < tolerance;
  return report;
}

TickRecord step(World& world, const Commands& u_hat, bool use_filter, safety::SafetyFilter* filter) {
  const std::size_t n = world.robots.size();
  if (u_hat.size() != n)
    throw InputDomainError("step: " + std::to_string(u_hat.size()) + " commands for " + std::to_string(n) + " robots");
  if (!all_finite(u_hat)) throw InputDomainError("step: non-finite command");

  World next = world;
  TickRecord rec;
  rec.u_hat = u_hat;
  rec.filtered = use_filter;
  if (use_filter) {
    const Points pts = world.certificate_points();
    const auto fr = filter ? (*filter)(u_hat, pts) : safety::filter(u_hat, pts, world.certificate_params());
    rec.u_star = fr.u;
    rec.filter_status = fr.status;
    rec.unsafe_state = fr.unsafe_state;
  } else {
    rec.u_star.resize(n);
    const double a = world.params.alpha;
    for (std::size_t i = 0; i < n; ++i) rec.u_star[i] = u_hat[i].cwiseMax(-a).cwiseMin(a);
  }

  std::vector<Vec2> velocity(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& pose = next.robots[i].pose;
    if (world.model == Model::single_integrator) {
      velocity[i] = rec.u_star[i];
      pose = dynamics::si_step(pose, rec.u_star[i], world.dt);
    } else {
      const auto cmd = dynamics::si_to_uni(rec.u_star[i], pose, world.abstraction);
      velocity[i] = cmd.v * Vec2(std::cos(pose.theta), std::sin(pose.theta));
      pose = dynamics::uni_step(pose, cmd, world.dt);
    }
  }
  next.tick = world.tick + 1;
  next.t = static_cast<double>(next.tick) * world.dt;
  rec.tick = next.tick;
  rec.t = next.t;

  const auto contacts = detect_collisions(next);
  std::set<std::pair<int, int>> touching;
  for (const auto& c : contacts) {
    const auto ii = static_cast<std::size_t>(c.i);
    double approach = 0.0;
    Vec2 commanded_j = Vec2::Zero();
    if (c.j >= 0) {
      const auto jj = static_cast<std::size_t>(c.j);
      approach = std::max(0.0, (velocity[ii] - velocity[jj]).dot(c.normal));
      commanded_j = u_hat[jj];
    } else {
      approach = std::max(0.0, velocity[ii].dot(c.normal));
    }
    rec.contacts.push_back({c.i, c.j, approach});
    const std::pair<int, int> k{c.i, c.j};
    touching.insert(k);
    auto it = next.open_contacts.find(k);
    if (it == next.open_contacts.end()) {
      next.open_contacts.emplace(k, OpenContact{next.t, approach, world.dt, u_hat[ii], commanded_j});
    } else {
      it->second.duration += world.dt;
    }
  }
  for (auto it = next.open_contacts.begin(); it != next.open_contacts.end();) {
    if (touching.count(it->first)) {
      ++it;
      continue;
    }
    const auto& oc = it->second;
    next.closed_contacts.push_back(
        {oc.t_start, it->first.first, it->first.second, oc.normal_speed, oc.duration, oc.commanded_i, oc.commanded_j});
    it = next.open_contacts.erase(it);
  }

  if (next.non_penetration && !contacts.empty()) {
    const auto report = resolve_nonpenetration(next, contacts);
    rec.penetration_unresolved = !report.resolved;
  }

  rec.poses.reserve(n);
  for (const auto& r : next.robots) rec.poses.push_back(r.pose);
  world = std::move(next);
  return rec;
}

void flush_contacts(World& world, Trace& trace) {
  for (auto& e : world.closed_contacts) trace.events.push_back(e);
  world.closed_contacts.clear();
  for (const auto& [k, oc] : world.open_contacts)
    trace.events.push_back({oc.t_start, k.first, k.second, oc.normal_speed, oc.duration, oc.commanded_i, oc.commanded_j});
  world.open_contacts.clear();
  std::stable_sort(trace.events.begin(), trace.events.end(), [](const ContactEvent& a, const ContactEvent& b) {
    return a.t < b.t;
  });
}

ScoreReport safety_score(const Trace& trace, const safety::SafetyParams& params) {
  if (trace.ticks.empty() || trace.robots <= 0) throw InputDomainError("safety_score: empty trace has no score");
  ScoreReport r;
  r.ticks = trace.ticks.size();
  // Speeds are summed in units of alpha so that the worst case is exact.
  double severity = 0.0;
  for (const auto& tick : trace.ticks) {
    for (const auto& c : tick.contacts) {
      severity += c.normal_speed / params.alpha;
      ++r.contact_samples;
    }
  }
  const double worst = static_cast<double>(trace.robots) * static_cast<double>(r.ticks);
  r.score = std::clamp(1.0 - severity / worst, 0.0, 1.0);
  r.contact_events = trace.events.size();
  if (!trace.events.empty()) {
    double v = 0.0, d = 0.0;
    for (const auto& e : trace.events) {
      v += e.normal_speed;
      d += e.duration;
    }
    r.mean_collision_velocity = v / static_cast<double>(trace.events.size());
    r.mean_contact_duration = d / static_cast<double>(trace.events.size());
  }
  return r;
}

std::int64_t tick_count(double duration, double dt) {
  if (!(duration >= 0.0) || !(dt > 0.0)) throw ParameterError("duration must be non-negative and dt positive");
  return std::llround(duration / dt);
}

Trace simulate(const RunSpec& spec, controllers::Controller& controller) {
  if (spec.control_period_ticks < 1) throw ParameterError("control_period_ticks must be at least 1");
  World world = spec.world;
  world.validate();
  geometry::DensityField density = spec.density;

  Trace trace;
  trace.config = spec.config_snapshot;
  trace.robots = static_cast<int>(world.robots.size());
  trace.dt = world.dt;
  for (const auto& r : world.robots) trace.initial.push_back(r.pose);

  controller.reset();
  safety::SafetyFilter filter(world.certificate_params());
  const auto total = tick_count(spec.duration, world.dt);
  trace.ticks.reserve(static_cast<std::size_t>(total));
  Commands held(world.robots.size(), Vec2::Zero());
  std::set<std::string> seen;

  for (std::int64_t k = 0; k < total; ++k) {
    if (k % spec.control_period_ticks == 0) {
      if (spec.before_control) {
        const auto before = world.params;
        spec.before_control(world, density);
        if (!(world.params == before)) filter.set_params(world.certificate_params());
      }
      const Points pos = world.certificate_points();
      std::vector<double> headings;
      for (const auto& r : world.robots) headings.push_back(r.pose.theta);
      try {
        held = controller.compute({world.t, pos, headings, &density});
      } catch (const std::exception& e) {
        trace.status = "error";
        trace.error = std::string("controller failed at t=") + std::to_string(world.t) + ": " + e.what();
        break;
      }
      for (auto& d : controller.diagnostics())
        if (seen.insert(d).second) trace.diagnostics.push_back(d);
    }
    try {
      trace.ticks.push_back(step(world, held, spec.use_filter, &filter));
    } catch (const std::exception& e) {
      trace.status = "error";
      trace.error = std::string("tick rejected at t=") + std::to_string(world.t) + ": " + e.what();
      break;
    }
    for (auto& e : world.closed_contacts) trace.events.push_back(e);
    world.closed_contacts.clear();
  }
  flush_contacts(world, trace);
  return trace;
}

}  // namespace swarmlab::sim
