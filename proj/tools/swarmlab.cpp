// Command-line entry point: demo, run, verify and serve.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "swarmlab/config.hpp"
#include "swarmlab/experiment.hpp"
#include "swarmlab/server.hpp"
#include "swarmlab/trace_io.hpp"
#include "swarmlab/verify.hpp"

namespace {

using nlohmann::json;
using namespace swarmlab;

constexpr int kExitError = 2;
constexpr int kExitWrap = 1;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

// One machine-parsable line: "swarmlab: error[<kind>]: <message>".
int report_error(const std::string& kind, std::string message) {
  for (auto& ch : message)
    if (ch == '\n' || ch == '\r') ch = ' ';
  std::cerr << "swarmlab: error[" << kind << "]: " << message << '\n';
  return kExitError;
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> filter;
  std::optional<double> duration;
  std::optional<int> robots;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "random seed");
    app->add_option("--out", out, "output directory");
    app->add_option("--filter", filter, "safety filter on|off")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--duration", duration, "simulated seconds");
    app->add_option("--robots", robots, "number of robots");
  }

  // Preset < config file < environment < flags.
  config::ExperimentConfig build(json base) const {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      json file = json::parse(in, nullptr, false);
      if (file.is_discarded()) throw ConfigError("config: '" + config_path + "' is not valid JSON");
      if (!file.is_object()) throw ConfigError("config: '" + config_path + "' must hold a JSON object");
      base.merge_patch(file);
    }
    config::apply_environment(base);
    if (seed) base["seed"] = *seed;
    if (out) base["output"]["dir"] = *out;
    if (filter) base["filter"] = *filter == "on";
    if (duration) base["duration"] = *duration;
    if (robots) base["robots"] = *robots;
    return config::from_json(base);
  }
};

void print_summary(const json& s) {
  for (const char* key : {"status", "error", "safety_score", "contact_events", "min_pairwise_distance",
                          "final_max_pairwise_distance", "max_edge_error", "final_locational_cost",
                          "max_centroid_distance", "max_goal_error", "goals_reached_at"})
    if (s.contains(key)) std::cout << "  " << key << ": " << s[key].dump() << '\n';
}

int run_experiment(const config::ExperimentConfig& c) {
  const auto trace = config::run(c);
  const auto summary = experiment::summarize(c, trace);
  const auto written = experiment::write_outputs(c, trace, summary);
  print_summary(summary);
  for (const auto& p : written) std::cout << "  wrote " << p << '\n';
  if (trace.status != "complete") return report_error("runtime", trace.error);
  return 0;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"swarmlab: multi-robot simulation testbed with a safety filter"};
  app.require_subcommand(1);

  CommonFlags demo_flags, run_flags, verify_flags, serve_flags;

  auto* demo = app.add_subcommand("demo", "run a preset experiment (consensus, formation, coverage, swap)");
  std::string demo_name;
  std::optional<std::string> graph;
  demo->add_option("name", demo_name, "demo name")->required()->check(CLI::IsMember(experiment::demo_names()));
  demo->add_option("--graph", graph, "consensus graph: cycle|path|complete");
  demo_flags.attach(demo);

  auto* run = app.add_subcommand("run", "run the experiment described by a configuration file");
  run_flags.attach(run);

  auto* verify = app.add_subcommand("verify", "score a controller on the verification suite (filter off)");
  std::optional<std::string> controller_type;
  std::optional<std::string> command;
  verify->add_option("--controller", controller_type, "controller type (default: from config)");
  verify->add_option("--command", command, "external controller command line");
  verify_flags.attach(verify);

  auto* serve = app.add_subcommand("serve", "stream a live coverage session over TCP");
  std::string host = "127.0.0.1";
  int port = 8765;
  double serve_for = 0.0, time_scale = 1.0, rate = 20.0;
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "TCP port (0 picks a free one)");
  serve->add_option("--serve-for", serve_for, "stop after this many wall-clock seconds (0 = until interrupted)");
  serve->add_option("--time-scale", time_scale, "simulated seconds per wall-clock second");
  serve->add_option("--rate", rate, "state broadcast rate in Hz");
  serve_flags.attach(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  const json defaults = config::to_json(config::ExperimentConfig{});

  if (*demo) {
    json base = config::to_json(experiment::demo_config(demo_name));
    if (graph) base["controller"]["graph"] = *graph;
    const auto c = demo_flags.build(base);
    std::cout << "demo " << demo_name << " -> " << c.output.dir << '\n';
    return run_experiment(c);
  }
  if (*run) {
    const auto c = run_flags.build(defaults);
    std::cout << "run " << config::to_string(c.controller.type) << " -> " << c.output.dir << '\n';
    return run_experiment(c);
  }
  if (*verify) {
    json base = defaults;
    base["output"]["dir"] = "out/verify";
    if (controller_type) base["controller"]["type"] = *controller_type;
    if (command) {
      base["controller"]["type"] = "external";
      base["controller"]["command"] = split_words(*command);
    }
    const auto c = verify_flags.build(base);
    const auto suite = verify::default_suite(c);
    // A controller that cannot be loaded is a usage failure, not a zero score.
    config::make_controller(suite.front().config, config::initial_poses(suite.front().config));
    const auto report = verify::verify(suite);
    std::cout << verify::summary_text(report);
    io::write_file(c.output.dir + "/report.json", verify::to_json(report).dump(2) + "\n");
    std::cout << "  wrote " << c.output.dir << "/report.json\n";
    return report.decision == verify::Decision::bypass_allowed ? 0 : kExitWrap;
  }
  if (*serve) {
    json base = defaults;
    base["controller"]["type"] = "coverage";
    auto c = serve_flags.build(base);
    c.controller.type = config::ControllerType::coverage;
    server::Server srv(server::Session(c), {host, port, rate, time_scale});
    srv.start();
    std::cout << "listening on " << host << ':' << srv.port() << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    const auto start = std::chrono::steady_clock::now();
    while (!g_interrupted) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      if (serve_for > 0.0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(serve_for))
        break;
    }
    srv.stop();
    std::cout << "stopped after " << srv.ticks() << " ticks" << std::endl;
    return 0;
  }
  return report_error("usage", "no subcommand");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ConfigError& e) {
    return report_error("config", e.what());
  } catch (const ParameterError& e) {
    return report_error("parameter", e.what());
  } catch (const InputDomainError& e) {
    return report_error("input", e.what());
  } catch (const IndexError& e) {
    return report_error("index", e.what());
  } catch (const json::exception& e) {
    return report_error("config", e.what());
  } catch (const std::exception& e) {
    return report_error("runtime", e.what());
  }
}
