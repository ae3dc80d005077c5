#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "swarmlab/sim.hpp"

namespace swarmlab::io {

/// One JSON object per line: a header, one record per tick, one per contact
/// event, and a closing status record. See docs/trace_format.md.
void write_jsonl(const sim::Trace& trace, std::ostream& out);
/// Per-robot rows: t,id,x,y,theta,ux_hat,uy_hat,ux_star,uy_star.
void write_csv(const sim::Trace& trace, std::ostream& out);
/// Contact episodes: t,i,j,normal_speed,duration,ux_i,uy_i,ux_j,uy_j.
void write_contacts_csv(const sim::Trace& trace, std::ostream& out);

nlohmann::json tick_json(const sim::TickRecord& tick);
nlohmann::json event_json(const sim::ContactEvent& event);

/// Writes `text` to `path`, creating parent directories. Throws std::runtime_error on failure.
void write_file(const std::string& path, const std::string& text);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace swarmlab::io
