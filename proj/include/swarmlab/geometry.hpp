#pragma once

#include <span>
#include <vector>

#include "swarmlab/common.hpp"
#include "swarmlab/topology.hpp"

namespace swarmlab::geometry {

/// Uniform cell-centred discretisation of the workspace.
struct Grid {
  Bounds bounds{};
  int resolution = 128;  // cells per axis

  void validate() const;
  double cell_width() const { return bounds.width() / resolution; }
  double cell_height() const { return bounds.height() / resolution; }
  double cell_area() const { return cell_width() * cell_height(); }
  std::size_t cell_count() const { return static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution); }
  /// Row-major: index = iy * resolution + ix.
  Vec2 cell_center(std::size_t index) const;
};

struct DensityRef {
  int id = 0;
  Vec2 position = Vec2::Zero();
  double weight = 1.0;

  bool operator==(const DensityRef&) const = default;
};

/// phi(q) = floor + sum_k w_k exp(-|q - p_k|^2 / (2 sigma^2)).
///
/// References are piecewise constant in time: they only change when the
/// owner of the field replaces them, so `t` selects nothing by itself.
struct DensityField {
  std::vector<DensityRef> refs;
  double sigma = 0.12;
  double floor = 1e-3;

  void validate() const;
  bool operator==(const DensityField&) const = default;
};

double density_at(const DensityField& field, const Vec2& q, double t);

/// Density evaluated at every cell centre.
std::vector<double> sample_density(const Grid& grid, const DensityField& field, double t);

struct Tessellation {
  int resolution = 0;
  std::vector<int> owner;  // per cell, agent index
  std::vector<double> mass;
  Points centroid;
  /// Agents that own no cell. Their centroid is set to their own position.
  std::vector<bool> empty;
  double total_mass = 0.0;
};

/// Nearest-agent assignment of cell centres, ties to the lowest index.
Tessellation tessellate(std::span<const Vec2> x, const Grid& grid, const DensityField& field, double t);
Tessellation tessellate(std::span<const Vec2> x, const Grid& grid, std::span<const double> density);

/// Midpoint-rule quadrature of sum_i int_{V_i} |q - x_i|^2 phi(q) dq.
double locational_cost(std::span<const Vec2> x, const Tessellation& tess, const Grid& grid,
                       const DensityField& field, double t);
double locational_cost(std::span<const Vec2> x, const Tessellation& tess, const Grid& grid,
                       std::span<const double> density);

/// Agents whose cells are 4-adjacent somewhere on the grid.
Topology delaunay_neighbors(const Tessellation& tess);

}  // namespace swarmlab::geometry
