#include "swarmlab/external.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace swarmlab::controllers {

std::string find_executable(const std::string& name) {
  if (name.empty()) return {};
  if (name.find('/') != std::string::npos) return ::access(name.c_str(), X_OK) == 0 ? name : std::string{};
  const char* path = std::getenv("PATH");
  std::stringstream dirs(path ? path : "/usr/bin:/bin");
  std::string dir;
  while (std::getline(dirs, dir, ':')) {
    const std::string candidate = (dir.empty() ? "." : dir) + "/" + name;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

ExternalController::ExternalController(std::vector<std::string> argv, double timeout_seconds)
    : argv_(std::move(argv)), timeout_(timeout_seconds) {
  if (argv_.empty()) throw ConfigError("external controller: empty command");
  if (find_executable(argv_.front()).empty())
    throw ConfigError("external controller: cannot execute '" + argv_.front() + "'");
  if (!(timeout_ > 0.0)) throw ConfigError("external controller: timeout must be positive");
}

ExternalController::~ExternalController() { stop(); }

void ExternalController::start() {
  ::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) throw std::runtime_error("external controller: pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw std::runtime_error("external controller: pipe failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("external controller: fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  buffer_.clear();
}

void ExternalController::stop() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    ::kill(pid_, SIGTERM);
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string ExternalController::read_line() {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(timeout_);
  for (;;) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (left <= 0) throw std::runtime_error("external controller: timed out waiting for a reply");
    pollfd pfd{from_child_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc <= 0) continue;
    char chunk[4096];
    const ssize_t got = ::read(from_child_, chunk, sizeof chunk);
    if (got <= 0) throw std::runtime_error("external controller: process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
}

Commands ExternalController::compute(const ControlInput& in) {
  if (pid_ < 0) start();
  nlohmann::json msg;
  msg["v"] = 1;
  msg["t"] = in.t;
  auto& robots = msg["robots"] = nlohmann::json::array();
  for (std::size_t i = 0; i < in.positions.size(); ++i) {
    const double theta = i < in.headings.size() ? in.headings[i] : 0.0;
    robots.push_back({{"id", i}, {"x", in.positions[i].x()}, {"y", in.positions[i].y()}, {"theta", theta}});
  }
  auto& refs = msg["density_refs"] = nlohmann::json::array();
  if (in.density)
    for (const auto& r : in.density->refs)
      refs.push_back({{"id", r.id}, {"x", r.position.x()}, {"y", r.position.y()}, {"w", r.weight}});
  const std::string line = msg.dump() + "\n";
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t w = ::write(to_child_, line.data() + sent, line.size() - sent);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw std::runtime_error("external controller: process is not accepting input");
    sent += static_cast<std::size_t>(w);
  }
  const auto reply = nlohmann::json::parse(read_line(), nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("u") || !reply["u"].is_array())
    throw std::runtime_error("external controller: malformed reply");
  const auto& u = reply["u"];
  if (u.size() != in.positions.size()) throw std::runtime_error("external controller: wrong number of commands");
  Commands out;
  out.reserve(u.size());
  for (const auto& ui : u) {
    if (!ui.is_array() || ui.size() != 2 || !ui[0].is_number() || !ui[1].is_number())
      throw std::runtime_error("external controller: each command must be [ux, uy]");
    out.emplace_back(ui[0].get<double>(), ui[1].get<double>());
  }
  return out;
}

}  // namespace swarmlab::controllers
