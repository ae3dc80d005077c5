#pragma once

#include <utility>
#include <vector>

namespace swarmlab {

/// Undirected interaction graph over agents 0..n-1. Edges are stored once,
/// as (i, j) with i < j, sorted.
struct Topology {
  int n = 0;
  std::vector<std::pair<int, int>> edges;

  Topology() = default;
  Topology(int n, std::vector<std::pair<int, int>> edges);

  static Topology cycle(int n);
  static Topology path(int n);
  static Topology complete(int n);

  bool has_edge(int i, int j) const;
  std::vector<std::vector<int>> neighbors() const;

  bool operator==(const Topology&) const = default;
};

}  // namespace swarmlab
