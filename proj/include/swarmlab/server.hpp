#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "swarmlab/config.hpp"
#include "swarmlab/sim.hpp"

namespace swarmlab::server {

inline constexpr int kProtocolVersion = 1;
/// Frames larger than this are refused and the connection is closed.
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 20;

/// 4-byte big-endian payload length followed by the UTF-8 JSON text.
std::string encode_frame(std::string_view payload);

/// Incremental decoder for the length-prefixed frame stream.
class FrameDecoder {
 public:
  void feed(const char* data, std::size_t size);
  /// Next complete payload, if any. Throws std::length_error on an oversized frame.
  std::optional<std::string> next();

 private:
  std::string buffer_;
};

nlohmann::json error_message(const std::string& reason);

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

/// One live simulation with human-steered density references. Not
/// thread-safe: the server's simulation thread is its only user.
class Session {
 public:
  explicit Session(config::ExperimentConfig c);

  /// Applies one decoded message. Returns the reply to send back to the
  /// sender, if any (an error, or the server's hello).
  std::optional<nlohmann::json> handle_message(const nlohmann::json& msg);
  /// Parses a frame payload, replying with an error when it is not JSON.
  std::optional<nlohmann::json> handle_frame(std::string_view text);

  /// Advances one simulation tick unless paused. Queued parameter changes
  /// take effect at the start of the next control period.
  void tick();

  /// Snapshot broadcast to clients.
  nlohmann::json state_message() const;

  bool paused() const { return paused_; }
  std::int64_t ticks() const { return world_.tick; }
  double time() const { return world_.t; }
  const sim::World& world() const { return world_; }
  const std::map<int, geometry::DensityRef>& refs() const { return refs_; }
  geometry::DensityField density() const;
  const config::ExperimentConfig& config() const { return config_; }
  double score_so_far() const;
  void set_clients(int n) { clients_ = n; }
  const std::string& last_error() const { return last_error_; }

  /// Accepted range of each `set_param` name.
  std::map<std::string, ParamRange> param_ranges() const;

 private:
  void apply_pending();

  config::ExperimentConfig config_;
  sim::World world_;
  std::unique_ptr<controllers::Controller> controller_;
  safety::SafetyFilter filter_;
  std::map<int, geometry::DensityRef> refs_;
  std::map<std::string, double> pending_;
  Commands held_;
  bool paused_ = false;
  int clients_ = 0;
  double severity_ = 0.0;
  std::int64_t scored_ticks_ = 0;
  std::string last_error_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  double broadcast_hz = 20.0;
  /// Simulated seconds per wall-clock second.
  double time_scale = 1.0;
};

/// TCP front end. One thread owns the session; each client has a reader and
/// a writer thread. Readers only enqueue frames, the simulation thread applies
/// them at tick boundaries, and writers hold a single latest-state slot so a
/// slow client drops stale states instead of stalling the simulation.
class Server {
 public:
  Server(Session session, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts serving. Throws std::runtime_error when the address
  /// cannot be bound.
  void start();
  void stop();
  int port() const { return port_; }
  std::int64_t ticks() const { return ticks_.load(); }
  int clients() const { return client_count_.load(); }

 private:
  struct Client;
  void accept_loop();
  void sim_loop();
  void reader(std::shared_ptr<Client> c);
  void writer(std::shared_ptr<Client> c);
  void reap(bool all);

  Session session_;
  ServerOptions options_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::int64_t> ticks_{0};
  std::atomic<int> client_count_{0};
  std::thread accept_thread_;
  std::thread sim_thread_;
  std::mutex clients_mutex_;
  std::vector<std::shared_ptr<Client>> clients_;
  std::mutex inbox_mutex_;
  std::deque<std::pair<std::shared_ptr<Client>, std::string>> inbox_;
};

/// Blocking client connection, used by tests and scripted sessions.
class Connection {
 public:
  Connection(const std::string& host, int port);
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  void send(const nlohmann::json& msg);
  void send_raw(std::string_view payload);
  /// Next message, or nullopt once `timeout` passes or the peer closes.
  std::optional<nlohmann::json> receive(std::chrono::milliseconds timeout);

 private:
  int fd_ = -1;
  FrameDecoder decoder_;
};

}  // namespace swarmlab::server
