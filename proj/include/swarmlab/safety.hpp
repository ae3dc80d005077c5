#pragma once

#include <map>
#include <span>
#include <vector>

#include "swarmlab/common.hpp"
#include "swarmlab/qp.hpp"

namespace swarmlab::safety {

struct SafetyParams {
  double ds = 0.08;     // minimum inter-robot distance, m
  double gamma = 1.0;   // class-K gain, 1/s
  double alpha = 0.1;   // per-component velocity bound, m/s
  Bounds bounds{};

  /// Throws ParameterError when an invariant does not hold.
  void validate() const;
  bool operator==(const SafetyParams&) const = default;
};

/// Where a certificate row comes from. Robot indices are 0-based.
struct RowLabel {
  enum class Kind { pair, boundary };
  Kind kind = Kind::pair;
  int i = 0;
  int j = -1;    // second robot for pair rows
  int axis = 0;  // 0 = x walls, 1 = y walls (boundary rows)

  auto operator<=>(const RowLabel&) const = default;
};

/// Stacked certificate A u <= b plus the per-component box |u_k| <= box.
struct ConstraintSet {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double box = 0.0;
  std::vector<RowLabel> labels;

  Eigen::Index rows() const { return A.rows(); }
};

struct PairRow {
  Eigen::RowVectorXd a;  // width 2N
  double b = 0.0;
};

/// The two wall rows of one robot, expressed in that robot's 2-column slot.
struct BoundaryRows {
  int robot = 0;
  Eigen::Matrix2d local = Eigen::Matrix2d::Zero();
  Eigen::Vector2d b = Eigen::Vector2d::Zero();
};

/// ||x_i - x_j||^2 - ds^2.
double h_pair(const Vec2& xi, const Vec2& xj, double ds);

/// (right - x)(x - left) and (top - y)(y - bottom).
Eigen::Vector2d h_boundary(const Vec2& xi, const Bounds& bounds);

PairRow pairwise_row(std::span<const Vec2> x, int i, int j, const SafetyParams& params);

BoundaryRows boundary_rows(const Vec2& xi, int i, const SafetyParams& params);

/// All N(N-1)/2 pair rows (i < j, lexicographic) followed by 2N wall rows.
ConstraintSet assemble(std::span<const Vec2> x, const SafetyParams& params);

/// Separation beyond which a pair row is slack for every command in the
/// velocity box: gamma (d^2 - ds^2) > 2 d * 2 sqrt(2) alpha holds for all
/// d above this value.
double activation_radius(const SafetyParams& params);

struct FilterOptions {
  bool prune = true;
  double tolerance = 1e-8;
  int max_iterations = 10000;
};

struct FilterResult {
  Commands u;
  qp::Status status = qp::Status::optimal;
  /// Set when some barrier value was already negative on entry.
  bool unsafe_state = false;
  std::vector<RowLabel> violated;
  int iterations = 0;
  double max_violation = 0.0;
  std::size_t rows_used = 0;
};

/// Minimally invasive projection of `u_hat` onto the certificate polytope.
FilterResult filter(std::span<const Vec2> u_hat, std::span<const Vec2> x, const SafetyParams& params,
                    const FilterOptions& options = {});

/// Stateful wrapper that warm-starts each solve from the previous call's
/// multipliers, matched by row label. Owned by one simulation loop.
class SafetyFilter {
 public:
  explicit SafetyFilter(SafetyParams params, FilterOptions options = {});

  FilterResult operator()(std::span<const Vec2> u_hat, std::span<const Vec2> x);

  const SafetyParams& params() const { return params_; }
  void set_params(const SafetyParams& params);
  void reset() { warm_.clear(); }

 private:
  SafetyParams params_;
  FilterOptions options_;
  std::map<RowLabel, double> warm_;
};

}  // namespace swarmlab::safety
