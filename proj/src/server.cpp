#include "swarmlab/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace swarmlab::server {

using nlohmann::json;

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw std::length_error("frame too large");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

void FrameDecoder::feed(const char* data, std::size_t size) { buffer_.append(data, size); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data());
  const std::uint32_t n = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) |
                          std::uint32_t{p[3]};
  if (n > kMaxFrameBytes) throw std::length_error("frame of " + std::to_string(n) + " bytes exceeds the limit");
  if (buffer_.size() < 4 + std::size_t{n}) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + std::size_t{n});
  return payload;
}

json error_message(const std::string& reason) {
  return {{"v", kProtocolVersion}, {"type", "error"}, {"reason", reason}};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<dynamics::Pose> poses_of(const sim::World& w) {
  std::vector<dynamics::Pose> out;
  for (const auto& r : w.robots) out.push_back(r.pose);
  return out;
}

bool finite_number(const json& msg, const char* key) {
  return msg.contains(key) && msg[key].is_number() && std::isfinite(msg[key].get<double>());
}

std::string range_text(const ParamRange& r) {
  return "[" + std::to_string(r.lo) + ", " + std::to_string(r.hi) + "]";
}

}  // namespace

Session::Session(config::ExperimentConfig c)
    : config_(std::move(c)),
      world_(config::make_run_spec(config_).world),
      controller_(config::make_controller(config_, poses_of(world_))),
      filter_(world_.certificate_params()) {
  for (const auto& r : config_.controller.density.refs) refs_[r.id] = r;
  held_.assign(world_.robots.size(), Vec2::Zero());
}

std::map<std::string, ParamRange> Session::param_ranges() const {
  const auto& b = config_.safety.bounds;
  return {{"ds", {2.0 * config_.robot_radius, 0.25 * std::min(b.width(), b.height())}},
          {"gamma", {0.01, 100.0}},
          {"kappa", {0.01, 100.0}},
          {"sigma", {0.01, 1.0}}};
}

geometry::DensityField Session::density() const {
  geometry::DensityField d = config_.controller.density;
  d.refs.clear();
  for (const auto& [id, r] : refs_) d.refs.push_back(r);
  return d;
}

std::optional<json> Session::handle_frame(std::string_view text) {
  const json msg = json::parse(text.begin(), text.end(), nullptr, false);
  if (msg.is_discarded()) return error_message("malformed frame: not valid JSON");
  return handle_message(msg);
}

std::optional<json> Session::handle_message(const json& msg) {
  if (!msg.is_object()) return error_message("message must be a JSON object");
  if (!msg.contains("type") || !msg["type"].is_string()) return error_message("message has no string 'type'");
  if (!msg.contains("v") || !msg["v"].is_number_integer()) return error_message("message has no integer 'v'");
  if (msg["v"].get<int>() != kProtocolVersion)
    return error_message("unsupported protocol version " + msg["v"].dump() + " (server speaks " +
                         std::to_string(kProtocolVersion) + ")");
  const std::string type = msg["type"];
  const Bounds& b = config_.safety.bounds;

  if (type == "hello") {
    return json{{"v", kProtocolVersion},
                {"type", "hello"},
                {"role", "server"},
                {"robots", world_.robots.size()},
                {"bounds", {{"left", b.left}, {"right", b.right}, {"bottom", b.bottom}, {"top", b.top}}},
                {"dt", world_.dt},
                {"robot_radius", config_.robot_radius}};
  }
  if (type == "cursor_add" || type == "cursor_update" || type == "cursor_remove") {
    if (!msg.contains("id") || !msg["id"].is_number_integer()) return error_message(type + ": 'id' must be an integer");
    const int id = msg["id"];
    const bool known = refs_.count(id) > 0;
    if (type == "cursor_remove") {
      if (!known) return error_message("cursor_remove: unknown id " + std::to_string(id));
      refs_.erase(id);
      return std::nullopt;
    }
    if (type == "cursor_add" && known) return error_message("cursor_add: id " + std::to_string(id) + " already exists");
    if (type == "cursor_update" && !known) return error_message("cursor_update: unknown id " + std::to_string(id));
    if (!finite_number(msg, "x") || !finite_number(msg, "y")) return error_message(type + ": 'x' and 'y' must be numbers");
    const Vec2 p(msg["x"].get<double>(), msg["y"].get<double>());
    if (!b.contains(p)) return error_message(type + ": position outside the workspace");
    double w = known ? refs_[id].weight : 1.0;
    if (msg.contains("w")) {
      if (!finite_number(msg, "w")) return error_message(type + ": 'w' must be a number");
      w = msg["w"].get<double>();
      if (!(w > 0.0 && w <= 100.0)) return error_message(type + ": 'w' must be in (0, 100]");
    }
    refs_[id] = geometry::DensityRef{id, p, w};
    return std::nullopt;
  }
  if (type == "set_param") {
    if (!msg.contains("name") || !msg["name"].is_string()) return error_message("set_param: 'name' must be a string");
    const std::string name = msg["name"];
    const auto ranges = param_ranges();
    const auto it = ranges.find(name);
    if (it == ranges.end()) return error_message("set_param: unknown parameter '" + name + "' (ds, gamma, kappa, sigma)");
    if (!finite_number(msg, "value")) return error_message("set_param: 'value' must be a number");
    const double v = msg["value"];
    if (!(v >= it->second.lo && v <= it->second.hi))
      return error_message("set_param: " + name + " out of range, valid range " + range_text(it->second));
    pending_[name] = v;
    return std::nullopt;
  }
  if (type == "pause") {
    paused_ = true;
    return std::nullopt;
  }
  if (type == "resume") {
    paused_ = false;
    return std::nullopt;
  }
  return error_message("unknown message type '" + type + "'");
}

void Session::apply_pending() {
  if (pending_.empty()) return;
  bool safety_changed = false, controller_changed = false;
  for (const auto& [name, v] : pending_) {
    if (name == "ds") {
      config_.safety.ds = v;
      safety_changed = true;
    } else if (name == "gamma") {
      config_.safety.gamma = v;
      safety_changed = true;
    } else if (name == "kappa") {
      config_.controller.kappa = v;
      controller_changed = true;
    } else if (name == "sigma") {
      config_.controller.density.sigma = v;
    }
  }
  pending_.clear();
  if (safety_changed) {
    world_.params = config_.safety;
    filter_.set_params(world_.certificate_params());
  }
  if (controller_changed) controller_ = config::make_controller(config_, poses_of(world_));
}

void Session::tick() {
  if (paused_) return;
  if (world_.tick % config_.control_period_ticks == 0) {
    apply_pending();
    const Points pos = world_.certificate_points();
    std::vector<double> headings;
    for (const auto& r : world_.robots) headings.push_back(r.pose.theta);
    const auto field = density();
    try {
      held_ = controller_->compute({world_.t, pos, headings, &field});
      last_error_.clear();
    } catch (const std::exception& e) {
      held_.assign(world_.robots.size(), Vec2::Zero());
      last_error_ = e.what();
    }
  }
  const auto rec = sim::step(world_, held_, config_.filter, &filter_);
  for (const auto& c : rec.contacts) severity_ += c.normal_speed;
  ++scored_ticks_;
  world_.closed_contacts.clear();
}

double Session::score_so_far() const {
  if (scored_ticks_ == 0 || world_.robots.empty()) return 1.0;
  const double worst =
      static_cast<double>(world_.robots.size()) * static_cast<double>(scored_ticks_) * world_.params.alpha;
  return std::clamp(1.0 - severity_ / worst, 0.0, 1.0);
}

json Session::state_message() const {
  json robots = json::array();
  for (const auto& r : world_.robots)
    robots.push_back({{"id", r.id}, {"x", r.pose.x}, {"y", r.pose.y}, {"theta", r.pose.theta}});
  json refs = json::array();
  for (const auto& [id, r] : refs_)
    refs.push_back({{"id", id}, {"x", r.position.x()}, {"y", r.position.y()}, {"w", r.weight}});
  json msg = {{"v", kProtocolVersion},
              {"type", "state"},
              {"t", world_.t},
              {"tick", world_.tick},
              {"status", paused_ ? "paused" : "running"},
              {"robots", robots},
              {"density_refs", refs},
              {"params",
               {{"ds", config_.safety.ds},
                {"gamma", config_.safety.gamma},
                {"alpha", config_.safety.alpha},
                {"kappa", config_.controller.kappa},
                {"sigma", config_.controller.density.sigma}}},
              {"score", score_so_far()},
              {"clients", clients_}};
  if (!last_error_.empty()) msg["controller_error"] = last_error_;
  return msg;
}

// ---------------------------------------------------------------------------

struct Server::Client {
  int fd = -1;
  std::mutex m;
  std::condition_variable cv;
  std::deque<std::string> replies;
  std::optional<std::string> latest;
  bool closed = false;
  std::thread reader;
  std::thread writer;
  std::atomic<int> finished{0};

  void post_reply(std::string frame) {
    {
      std::lock_guard lock(m);
      if (closed) return;
      replies.push_back(std::move(frame));
    }
    cv.notify_one();
  }
  void post_state(const std::string& frame) {
    {
      std::lock_guard lock(m);
      if (closed) return;
      latest = frame;  // latest wins
    }
    cv.notify_one();
  }
  void close() {
    {
      std::lock_guard lock(m);
      closed = true;
    }
    ::shutdown(fd, SHUT_RDWR);
    cv.notify_all();
  }
};

namespace {

bool send_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

Server::Server(Session session, ServerOptions options) : session_(std::move(session)), options_(std::move(options)) {
  if (!(options_.broadcast_hz > 0.0)) throw ParameterError("server: broadcast rate must be positive");
  if (!(options_.time_scale > 0.0)) throw ParameterError("server: time scale must be positive");
}

Server::~Server() { stop(); }

void Server::start() {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(options_.port);
  if (::getaddrinfo(options_.host.c_str(), port.c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("server: cannot resolve host '" + options_.host + "'");
  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    ::freeaddrinfo(res);
    throw std::runtime_error("server: socket failed");
  }
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("server: cannot bind " + options_.host + ":" + port + ": " + why);
  }
  ::freeaddrinfo(res);
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  sim_thread_ = std::thread([this] { sim_loop(); });
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void Server::stop() {
  stopping_ = true;
  if (sim_thread_.joinable()) sim_thread_.join();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  reap(true);
}

void Server::accept_loop() {
  while (!stopping_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 50);
    reap(false);
    if (rc <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    auto c = std::make_shared<Client>();
    c->fd = fd;
    c->reader = std::thread([this, c] { reader(c); });
    c->writer = std::thread([this, c] { writer(c); });
    std::lock_guard lock(clients_mutex_);
    clients_.push_back(c);
    client_count_ = static_cast<int>(clients_.size());
  }
}

void Server::reap(bool all) {
  std::vector<std::shared_ptr<Client>> done;
  {
    std::lock_guard lock(clients_mutex_);
    for (auto it = clients_.begin(); it != clients_.end();) {
      if (all) (*it)->close();
      if (all || (*it)->finished.load() == 2) {
        done.push_back(*it);
        it = clients_.erase(it);
      } else {
        ++it;
      }
    }
    client_count_ = static_cast<int>(clients_.size());
  }
  for (auto& c : done) {
    if (c->reader.joinable()) c->reader.join();
    if (c->writer.joinable()) c->writer.join();
    ::close(c->fd);
  }
}

void Server::reader(std::shared_ptr<Client> c) {
  FrameDecoder decoder;
  char buf[8192];
  for (;;) {
    const ssize_t n = ::recv(c->fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    decoder.feed(buf, static_cast<std::size_t>(n));
    try {
      while (auto frame = decoder.next()) {
        std::lock_guard lock(inbox_mutex_);
        inbox_.emplace_back(c, std::move(*frame));
      }
    } catch (const std::length_error& e) {
      // The stream cannot be resynchronised after a bad length prefix.
      c->post_reply(encode_frame(error_message(std::string("malformed frame: ") + e.what()).dump()));
      {
        std::unique_lock lock(c->m);
        c->cv.wait_for(lock, std::chrono::milliseconds(200), [&] { return c->replies.empty(); });
      }
      break;
    }
  }
  c->close();
  ++c->finished;
}

void Server::writer(std::shared_ptr<Client> c) {
  for (;;) {
    std::string out;
    {
      std::unique_lock lock(c->m);
      c->cv.wait(lock, [&] { return c->closed || !c->replies.empty() || c->latest; });
      if (c->closed) break;
      while (!c->replies.empty()) {
        out += c->replies.front();
        c->replies.pop_front();
      }
      if (c->latest) {
        out += *c->latest;
        c->latest.reset();
      }
    }
    c->cv.notify_all();
    if (!send_all(c->fd, out)) break;
  }
  c->close();
  ++c->finished;
}

void Server::sim_loop() {
  using clock = std::chrono::steady_clock;
  const double dt = session_.world().dt;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(dt / options_.time_scale));
  const auto per_broadcast = std::max<std::int64_t>(1, std::llround(1.0 / (options_.broadcast_hz * dt)));
  auto next = clock::now();
  for (std::int64_t k = 0; !stopping_; ++k) {
    std::deque<std::pair<std::shared_ptr<Client>, std::string>> inbox;
    {
      std::lock_guard lock(inbox_mutex_);
      inbox.swap(inbox_);
    }
    for (auto& [client, text] : inbox)
      if (auto reply = session_.handle_frame(text)) client->post_reply(encode_frame(reply->dump()));

    session_.set_clients(client_count_.load());
    session_.tick();
    ticks_ = session_.ticks();

    if (k % per_broadcast == 0) {
      const std::string frame = encode_frame(session_.state_message().dump());
      std::lock_guard lock(clients_mutex_);
      for (auto& c : clients_) c->post_state(frame);
    }

    next += period;
    const auto now = clock::now();
    if (next > now) std::this_thread::sleep_until(next);
    else if (now - next > 10 * period) next = now;  // fell far behind: do not try to catch up in a burst
  }
}

// ---------------------------------------------------------------------------

Connection::Connection(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("connection: cannot resolve '" + host + "'");
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    ::freeaddrinfo(res);
    if (fd_ >= 0) ::close(fd_);
    throw std::runtime_error("connection: cannot connect to " + host + ":" + std::to_string(port));
  }
  ::freeaddrinfo(res);
}

Connection::~Connection() {
  if (fd_ >= 0) ::close(fd_);
}

void Connection::send(const json& msg) { send_raw(msg.dump()); }

void Connection::send_raw(std::string_view payload) {
  if (!send_all(fd_, encode_frame(payload))) throw std::runtime_error("connection: send failed");
}

std::optional<json> Connection::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto frame = decoder_.next()) return json::parse(*frame);
    const auto left =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
    if (left <= 0) return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    char buf[8192];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n <= 0) return std::nullopt;
    decoder_.feed(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace swarmlab::server
