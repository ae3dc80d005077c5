#include "swarmlab/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace swarmlab::controllers {

namespace {

void require_size(std::size_t agents, int expected, const char* what) {
  if (static_cast<int>(agents) != expected)
    throw InputDomainError(std::string(what) + ": topology has " + std::to_string(expected) + " agents, state has " +
                           std::to_string(agents));
}

}  // namespace

Commands consensus(std::span<const Vec2> x, const Topology& g) {
  require_size(x.size(), g.n, "consensus");
  Commands u(x.size(), Vec2::Zero());
  for (auto [i, j] : g.edges) {
    const Vec2 d = x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
    u[static_cast<std::size_t>(i)] += d;
    u[static_cast<std::size_t>(j)] -= d;
  }
  return u;
}

double FormationSpec::distance(int i, int j) const {
  const auto it = distances.find({std::min(i, j), std::max(i, j)});
  if (it == distances.end())
    throw ConfigError("formation: missing desired distance for edge (" + std::to_string(i) + ", " +
                      std::to_string(j) + ")");
  return it->second;
}

void FormationSpec::validate(std::size_t agents) const {
  require_size(agents, topology.n, "formation");
  if (!(gain > 0.0)) throw ParameterError("formation: gain must be positive");
  for (auto [i, j] : topology.edges) {
    const double d = distance(i, j);
    if (!(d > 0.0)) throw ConfigError("formation: desired distances must be positive");
  }
}

Commands formation(std::span<const Vec2> x, const FormationSpec& spec) {
  spec.validate(x.size());
  Commands u(x.size(), Vec2::Zero());
  for (auto [i, j] : spec.topology.edges) {
    const double d = spec.distance(i, j);
    const Vec2 diff = x[static_cast<std::size_t>(j)] - x[static_cast<std::size_t>(i)];
    const Vec2 term = spec.gain * (diff.squaredNorm() - d * d) * diff;
    u[static_cast<std::size_t>(i)] += term;
    u[static_cast<std::size_t>(j)] -= term;
  }
  return u;
}

double edge_tension(std::span<const Vec2> x, const FormationSpec& spec) {
  spec.validate(x.size());
  // Each undirected edge appears twice in the double sum, cancelling the 1/2.
  double w = 0.0;
  for (auto [i, j] : spec.topology.edges) {
    const double d = spec.distance(i, j);
    const double e = (x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)]).squaredNorm() - d * d;
    w += 0.25 * spec.gain * e * e;
  }
  return w;
}

void CoverageParams::validate() const {
  if (!(kappa > 0.0)) throw ParameterError("coverage: kappa must be positive");
  if (resolution < 16) throw ParameterError("coverage: resolution must be at least 16");
}

CoverageResult coverage(std::span<const Vec2> x, const geometry::DensityField& density, const CoverageParams& params,
                        double t, const Bounds& bounds, const DensityHistory* previous) {
  params.validate();
  density.validate();
  for (const auto& xi : x)
    if (!all_finite(xi) || !bounds.contains(xi, 1e-9)) throw InputDomainError("coverage: agent outside the workspace");

  const geometry::Grid grid{bounds, params.resolution};
  const auto phi = geometry::sample_density(grid, density, t);
  CoverageResult out;
  out.tessellation = geometry::tessellate(x, grid, phi);
  const auto& tess = out.tessellation;
  const std::size_t n = x.size();
  out.degenerate = tess.empty;

  Commands lloyd(n);
  for (std::size_t i = 0; i < n; ++i) lloyd[i] = params.kappa * (tess.centroid[i] - x[i]);

  if (params.mode == CoverageMode::lloyd) {
    out.u = lloyd;
  } else {
    // Time derivative of the centroids with the agents held fixed.
    Commands c_dot(n, Vec2::Zero());
    if (previous && t > previous->t) {
      const auto old = geometry::tessellate(x, grid, geometry::sample_density(grid, previous->field, previous->t));
      for (std::size_t i = 0; i < n; ++i)
        c_dot[i] = (tess.centroid[i] - old.centroid[i]) / (t - previous->t);
    }
    Commands v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = lloyd[i] + c_dot[i];

    // Central differences on agent positions. A step below one cell width
    // would only ever flip isolated cells, so the step is at least that wide.
    const double step = std::max(1e-4, std::max(grid.cell_width(), grid.cell_height()));
    std::vector<std::vector<Eigen::Matrix2d>> jac(n, std::vector<Eigen::Matrix2d>(n, Eigen::Matrix2d::Zero()));
    Points probe(x.begin(), x.end());
    for (std::size_t j = 0; j < n; ++j) {
      for (int k = 0; k < 2; ++k) {
        const double saved = probe[j][k];
        probe[j][k] = saved + step;
        const auto plus = geometry::tessellate(probe, grid, phi);
        probe[j][k] = saved - step;
        const auto minus = geometry::tessellate(probe, grid, phi);
        probe[j][k] = saved;
        for (std::size_t i = 0; i < n; ++i)
          jac[i][j].col(k) = (plus.centroid[i] - minus.centroid[i]) / (2.0 * step);
      }
    }
    const auto nbrs = geometry::delaunay_neighbors(tess).neighbors();
    out.u.assign(n, Vec2::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      Vec2 ui = v[i] + jac[i][i] * v[i];
      for (int j : nbrs[i]) ui += jac[i][static_cast<std::size_t>(j)] * v[static_cast<std::size_t>(j)];
      out.u[i] = ui;
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (out.degenerate[i]) out.u[i] = Vec2::Zero();
  return out;
}

Vec2 saturate(const Vec2& u, double limit) {
  const double m = u.cwiseAbs().maxCoeff();
  if (m <= limit || m == 0.0) return u;
  return u * (limit / m);
}

Commands go_to_goals(std::span<const Vec2> x, std::span<const Vec2> goals, double gain, double circulation,
                     double speed_limit) {
  if (x.size() != goals.size()) throw InputDomainError("go_to_goals: one goal per robot required");
  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(circulation).toRotationMatrix();
  Commands u(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) u[i] = saturate(gain * (rot * (goals[i] - x[i])), speed_limit);
  return u;
}

// ---------------------------------------------------------------------------

Commands ConsensusController::compute(const ControlInput& in) { return consensus(in.positions, graph_); }

Commands FormationController::compute(const ControlInput& in) { return formation(in.positions, spec_); }

CoverageController::CoverageController(CoverageParams params, Bounds bounds, geometry::DensityField fallback)
    : params_(params), bounds_(bounds), fallback_(std::move(fallback)) {
  params_.validate();
  fallback_.validate();
}

Commands CoverageController::compute(const ControlInput& in) {
  const auto& field = in.density ? *in.density : fallback_;
  auto result = coverage(in.positions, field, params_, in.t, bounds_, previous_ ? &*previous_ : nullptr);
  previous_ = DensityHistory{field, in.t};
  last_degenerate_ = std::move(result.degenerate);
  return std::move(result.u);
}

std::vector<std::string> CoverageController::diagnostics() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < last_degenerate_.size(); ++i)
    if (last_degenerate_[i]) out.push_back("coverage: agent " + std::to_string(i) + " owns an empty cell");
  return out;
}

GoalController::GoalController(Points goals, double gain, double circulation, double speed_limit)
    : goals_(std::move(goals)), gain_(gain), circulation_(circulation), speed_limit_(speed_limit) {
  if (!(gain_ > 0.0)) throw ParameterError("swap: gain must be positive");
  if (!(std::abs(circulation_) < 0.5 * std::numbers::pi)) throw ParameterError("swap: |circulation| must be below pi/2");
  if (!(speed_limit_ > 0.0)) throw ParameterError("swap: speed limit must be positive");
}

Commands GoalController::compute(const ControlInput& in) {
  return go_to_goals(in.positions, goals_, gain_, circulation_, speed_limit_);
}

Commands RandomController::compute(const ControlInput& in) {
  std::uniform_real_distribution<double> dist(-alpha_, alpha_);
  Commands u(in.positions.size());
  for (auto& ui : u) {
    const double ux = dist(rng_);
    const double uy = dist(rng_);
    ui = {ux, uy};
  }
  return u;
}

Commands HeadOnController::compute(const ControlInput& in) {
  if (fixed_.size() != in.positions.size()) {
    fixed_.assign(in.positions.size(), Vec2::Zero());
    for (std::size_t i = 0; i < in.positions.size(); ++i) {
      const Vec2 d = target_ - in.positions[i];
      if (d.norm() > 0.0) fixed_[i] = speed_ * d.normalized();
    }
  }
  return fixed_;
}

}  // namespace swarmlab::controllers
