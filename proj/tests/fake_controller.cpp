// Scripted external controller used by the tests. The first argument picks
// the behaviour: zero, seek (drive toward the origin), crash, garbage, hang.

#include <chrono>
#include <iostream>
#include <string>
#include <thread>

#include "json.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "zero";
  for (std::string line; std::getline(std::cin, line);) {
    const auto msg = nlohmann::json::parse(line);
    if (mode == "crash") return 3;
    if (mode == "hang") std::this_thread::sleep_for(std::chrono::seconds(30));
    if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    }
    nlohmann::json u = nlohmann::json::array();
    for (const auto& r : msg["robots"]) {
      const double x = r["x"], y = r["y"];
      if (mode == "seek") u.push_back({-x, -y});
      else u.push_back({0.0, 0.0});
    }
    std::cout << nlohmann::json{{"u", u}}.dump() << std::endl;
  }
  return 0;
}
