#include "swarmlab/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace swarmlab::geometry {

void Grid::validate() const {
  if (resolution < 16) throw ParameterError("grid resolution must be at least 16, got " + std::to_string(resolution));
  if (!(bounds.left < bounds.right) || !(bounds.bottom < bounds.top))
    throw ParameterError("grid bounds are empty");
}

Vec2 Grid::cell_center(std::size_t index) const {
  const auto res = static_cast<std::size_t>(resolution);
  const double ix = static_cast<double>(index % res);
  const double iy = static_cast<double>(index / res);
  return {bounds.left + (ix + 0.5) * cell_width(), bounds.bottom + (iy + 0.5) * cell_height()};
}

void DensityField::validate() const {
  if (!(sigma > 0.0)) throw ParameterError("density sigma must be positive");
  if (!(floor > 0.0)) throw ParameterError("density floor must be positive");
  for (const auto& r : refs) {
    if (!all_finite(r.position) || !std::isfinite(r.weight))
      throw ParameterError("density reference " + std::to_string(r.id) + " is not finite");
    if (r.weight < 0.0) throw ParameterError("density reference weights must be non-negative");
  }
}

double density_at(const DensityField& field, const Vec2& q, double /*t*/) {
  const double inv_two_sigma_sq = 1.0 / (2.0 * field.sigma * field.sigma);
  double phi = field.floor;
  for (const auto& r : field.refs) phi += r.weight * std::exp(-(q - r.position).squaredNorm() * inv_two_sigma_sq);
  return phi;
}

std::vector<double> sample_density(const Grid& grid, const DensityField& field, double t) {
  std::vector<double> out(grid.cell_count());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = density_at(field, grid.cell_center(c), t);
  return out;
}

Tessellation tessellate(std::span<const Vec2> x, const Grid& grid, const DensityField& field, double t) {
  const auto density = sample_density(grid, field, t);
  return tessellate(x, grid, density);
}

Tessellation tessellate(std::span<const Vec2> x, const Grid& grid, std::span<const double> density) {
  grid.validate();
  if (x.empty()) throw InputDomainError("tessellate: no agents");
  if (density.size() != grid.cell_count()) throw InputDomainError("tessellate: density sample count mismatch");

  const std::size_t n = x.size();
  Tessellation tess;
  tess.resolution = grid.resolution;
  tess.owner.assign(grid.cell_count(), 0);
  tess.mass.assign(n, 0.0);
  tess.centroid.assign(n, Vec2::Zero());
  tess.empty.assign(n, false);

  std::vector<Vec2> first_moment(n, Vec2::Zero());
  const double area = grid.cell_area();
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const Vec2 q = grid.cell_center(c);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (q - x[i]).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    tess.owner[c] = static_cast<int>(best);
    const double w = density[c] * area;
    tess.mass[best] += w;
    first_moment[best] += w * q;
    tess.total_mass += w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (tess.mass[i] > 0.0) {
      tess.centroid[i] = first_moment[i] / tess.mass[i];
    } else {
      tess.centroid[i] = x[i];
      tess.empty[i] = true;
    }
  }
  return tess;
}

double locational_cost(std::span<const Vec2> x, const Tessellation& tess, const Grid& grid, const DensityField& field,
                       double t) {
  const auto density = sample_density(grid, field, t);
  return locational_cost(x, tess, grid, density);
}

double locational_cost(std::span<const Vec2> x, const Tessellation& tess, const Grid& grid,
                       std::span<const double> density) {
  if (tess.owner.size() != grid.cell_count() || density.size() != grid.cell_count())
    throw InputDomainError("locational_cost: tessellation does not match the grid");
  const double area = grid.cell_area();
  double h = 0.0;
  for (std::size_t c = 0; c < grid.cell_count(); ++c) {
    const auto owner = static_cast<std::size_t>(tess.owner[c]);
    if (owner >= x.size()) throw InputDomainError("locational_cost: tessellation does not match the agents");
    h += (grid.cell_center(c) - x[owner]).squaredNorm() * density[c] * area;
  }
  return h;
}

Topology delaunay_neighbors(const Tessellation& tess) {
  const int res = tess.resolution;
  std::vector<std::pair<int, int>> edges;
  auto owner = [&](int ix, int iy) { return tess.owner[static_cast<std::size_t>(iy * res + ix)]; };
  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const int a = owner(ix, iy);
      if (ix + 1 < res && owner(ix + 1, iy) != a) edges.emplace_back(a, owner(ix + 1, iy));
      if (iy + 1 < res && owner(ix, iy + 1) != a) edges.emplace_back(a, owner(ix, iy + 1));
    }
  }
  return {static_cast<int>(tess.mass.size()), std::move(edges)};
}

}  // namespace swarmlab::geometry
