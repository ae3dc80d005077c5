#include "swarmlab/topology.hpp"

#include <algorithm>
#include <string>

#include "swarmlab/common.hpp"

namespace swarmlab {

Topology::Topology(int count, std::vector<std::pair<int, int>> input) : n(count) {
  if (n < 0) throw InputDomainError("topology: negative agent count");
  for (auto [i, j] : input) {
    if (i == j) throw InputDomainError("topology: self-loop on agent " + std::to_string(i));
    if (i < 0 || j < 0 || i >= n || j >= n)
      throw IndexError("topology: edge (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
    edges.emplace_back(std::min(i, j), std::max(i, j));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

Topology Topology::cycle(int n) {
  std::vector<std::pair<int, int>> e;
  if (n == 2) e.emplace_back(0, 1);
  if (n > 2)
    for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return {n, std::move(e)};
}

Topology Topology::path(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return {n, std::move(e)};
}

Topology Topology::complete(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) e.emplace_back(i, j);
  return {n, std::move(e)};
}

bool Topology::has_edge(int i, int j) const {
  const std::pair<int, int> key{std::min(i, j), std::max(i, j)};
  return std::binary_search(edges.begin(), edges.end(), key);
}

std::vector<std::vector<int>> Topology::neighbors() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
  for (auto [i, j] : edges) {
    out[static_cast<std::size_t>(i)].push_back(j);
    out[static_cast<std::size_t>(j)].push_back(i);
  }
  for (auto& v : out) std::sort(v.begin(), v.end());
  return out;
}

}  // namespace swarmlab
