#pragma once

#include <string>
#include <vector>

#include "swarmlab/controllers.hpp"

namespace swarmlab::controllers {

/// Runs a user controller as a child process speaking line-delimited JSON on
/// stdin/stdout. Each control period it receives
///   {"v":1,"t":...,"robots":[{"id":0,"x":...,"y":...,"theta":...},...],"density_refs":[...]}
/// and must answer with one line {"u":[[ux,uy],...]}.
class ExternalController final : public Controller {
 public:
  /// Throws ConfigError when the executable cannot be found.
  ExternalController(std::vector<std::string> argv, double timeout_seconds);
  ~ExternalController() override;
  ExternalController(const ExternalController&) = delete;
  ExternalController& operator=(const ExternalController&) = delete;

  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "external"; }
  void reset() override { stop(); }

 private:
  void start();
  void stop();
  std::string read_line();

  std::vector<std::string> argv_;
  double timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Resolves `name` against PATH (or checks it directly when it contains a
/// slash). Returns an empty string when nothing executable is found.
std::string find_executable(const std::string& name);

}  // namespace swarmlab::controllers
