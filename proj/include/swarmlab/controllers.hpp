#pragma once

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "swarmlab/common.hpp"
#include "swarmlab/geometry.hpp"
#include "swarmlab/topology.hpp"

namespace swarmlab::controllers {

// ---------------------------------------------------------------------------
// Control laws as pure functions of the team state.

/// u_i = sum_{j in N_i} (x_j - x_i).
Commands consensus(std::span<const Vec2> x, const Topology& g);

struct FormationSpec {
  Topology topology;
  std::map<std::pair<int, int>, double> distances;  // keyed by (i, j), i < j
  double gain = 1.0;

  double distance(int i, int j) const;
  /// Throws ConfigError on a missing or non-positive distance, ParameterError on a bad gain.
  void validate(std::size_t agents) const;
};

/// Negated gradient of `edge_tension`.
Commands formation(std::span<const Vec2> x, const FormationSpec& spec);

/// w(x) = 1/2 sum_i sum_{j in N_i} gain/4 (|x_i - x_j|^2 - d_ij^2)^2.
double edge_tension(std::span<const Vec2> x, const FormationSpec& spec);

enum class CoverageMode { lloyd, tvd_d1 };

struct CoverageParams {
  double kappa = 1.0;
  CoverageMode mode = CoverageMode::lloyd;
  int resolution = 128;

  void validate() const;
};

/// Density seen one control period earlier, for the time derivative of the
/// centroids.
struct DensityHistory {
  geometry::DensityField field;
  double t = 0.0;
};

struct CoverageResult {
  Commands u;
  geometry::Tessellation tessellation;
  /// Agents whose cell carries no mass; their command is zero.
  std::vector<bool> degenerate;
};

/// Lloyd descent u_i = kappa (c_i - x_i), or the TVD-D1 law with centroid
/// partials estimated by finite differences.
CoverageResult coverage(std::span<const Vec2> x, const geometry::DensityField& density, const CoverageParams& params,
                        double t, const Bounds& bounds, const DensityHistory* previous = nullptr);

/// Per-robot proportional law toward a goal. The error vector is rotated by
/// `circulation` radians (|circulation| < pi/2) so that symmetric crossings
/// turn into a roundabout instead of a standoff.
Commands go_to_goals(std::span<const Vec2> x, std::span<const Vec2> goals, double gain, double circulation,
                     double speed_limit);

/// Scales `u` so that its infinity norm does not exceed `limit`.
Vec2 saturate(const Vec2& u, double limit);

// ---------------------------------------------------------------------------
// Stateful controllers driven by the simulation loop.

struct ControlInput {
  double t = 0.0;
  std::span<const Vec2> positions;
  std::span<const double> headings;
  const geometry::DensityField* density = nullptr;
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual Commands compute(const ControlInput& in) = 0;
  virtual std::string_view name() const = 0;
  /// Returns the controller to its just-constructed state.
  virtual void reset() {}
  /// Flags raised by the last `compute` call, e.g. degenerate coverage cells.
  virtual std::vector<std::string> diagnostics() const { return {}; }
};

class ConsensusController final : public Controller {
 public:
  explicit ConsensusController(Topology g) : graph_(std::move(g)) {}
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "consensus"; }

 private:
  Topology graph_;
};

class FormationController final : public Controller {
 public:
  explicit FormationController(FormationSpec spec) : spec_(std::move(spec)) {}
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "formation"; }
  const FormationSpec& spec() const { return spec_; }

 private:
  FormationSpec spec_;
};

class CoverageController final : public Controller {
 public:
  CoverageController(CoverageParams params, Bounds bounds, geometry::DensityField fallback = {});
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "coverage"; }
  void reset() override { previous_.reset(); last_degenerate_.clear(); }
  std::vector<std::string> diagnostics() const override;

 private:
  CoverageParams params_;
  Bounds bounds_;
  geometry::DensityField fallback_;
  std::optional<DensityHistory> previous_;
  std::vector<bool> last_degenerate_;
};

class GoalController final : public Controller {
 public:
  GoalController(Points goals, double gain, double circulation, double speed_limit);
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "swap"; }
  const Points& goals() const { return goals_; }

 private:
  Points goals_;
  double gain_;
  double circulation_;
  double speed_limit_;
};

class ZeroController final : public Controller {
 public:
  Commands compute(const ControlInput& in) override { return Commands(in.positions.size(), Vec2::Zero()); }
  std::string_view name() const override { return "zero"; }
};

/// Commands drawn uniformly from the velocity box, independently per robot
/// and per call.
class RandomController final : public Controller {
 public:
  RandomController(std::uint64_t seed, double alpha) : seed_(seed), alpha_(alpha), rng_(seed) {}
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "random"; }
  void reset() override { rng_.seed(seed_); }

 private:
  std::uint64_t seed_;
  double alpha_;
  std::mt19937_64 rng_;
};

/// Every robot drives at `speed` toward `target`, along the heading fixed on
/// the first call.
class HeadOnController final : public Controller {
 public:
  HeadOnController(Vec2 target, double speed) : target_(target), speed_(speed) {}
  Commands compute(const ControlInput& in) override;
  std::string_view name() const override { return "headon"; }
  void reset() override { fixed_.clear(); }

 private:
  Vec2 target_;
  double speed_;
  Commands fixed_;
};

}  // namespace swarmlab::controllers
