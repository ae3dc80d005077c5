#include "swarmlab/safety.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace swarmlab::safety {

void SafetyParams::validate() const {
  if (!(ds > 0.0)) throw ParameterError("ds must be positive");
  if (!(gamma > 0.0)) throw ParameterError("gamma must be positive");
  if (!(alpha > 0.0)) throw ParameterError("alpha must be positive");
  if (!(bounds.left < bounds.right) || !(bounds.bottom < bounds.top))
    throw ParameterError("workspace bounds must satisfy left < right and bottom < top");
  if (!(bounds.width() > 2.0 * ds) || !(bounds.height() > 2.0 * ds))
    throw ParameterError("workspace must be wider and taller than 2 ds");
  if (!std::isfinite(ds) || !std::isfinite(gamma) || !std::isfinite(alpha) ||
      !std::isfinite(bounds.left) || !std::isfinite(bounds.right) || !std::isfinite(bounds.bottom) ||
      !std::isfinite(bounds.top))
    throw ParameterError("safety parameters must be finite");
}

double h_pair(const Vec2& xi, const Vec2& xj, double ds) { return (xi - xj).squaredNorm() - ds * ds; }

Eigen::Vector2d h_boundary(const Vec2& xi, const Bounds& bounds) {
  return {(bounds.right - xi.x()) * (xi.x() - bounds.left), (bounds.top - xi.y()) * (xi.y() - bounds.bottom)};
}

PairRow pairwise_row(std::span<const Vec2> x, int i, int j, const SafetyParams& params) {
  const int n = static_cast<int>(x.size());
  if (i == j) throw IndexError("pairwise_row: i and j must differ");
  if (i < 0 || j < 0 || i >= n || j >= n) throw IndexError("pairwise_row: robot index out of range");
  const Vec2 diff = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
  PairRow row;
  row.a = Eigen::RowVectorXd::Zero(2 * n);
  row.a.segment<2>(2 * i) = -2.0 * diff.transpose();
  row.a.segment<2>(2 * j) = 2.0 * diff.transpose();
  row.b = params.gamma * h_pair(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)], params.ds);
  return row;
}

BoundaryRows boundary_rows(const Vec2& xi, int i, const SafetyParams& params) {
  const auto& B = params.bounds;
  BoundaryRows out;
  out.robot = i;
  out.local(0, 0) = 2.0 * xi.x() - B.right - B.left;
  out.local(1, 1) = 2.0 * xi.y() - B.top - B.bottom;
  out.b = params.gamma * h_boundary(xi, B);
  return out;
}

ConstraintSet assemble(std::span<const Vec2> x, const SafetyParams& params) {
  const int n = static_cast<int>(x.size());
  const int pairs = n * (n - 1) / 2;
  ConstraintSet cs;
  cs.A = Eigen::MatrixXd::Zero(pairs + 2 * n, 2 * n);
  cs.b = Eigen::VectorXd::Zero(pairs + 2 * n);
  cs.box = params.alpha;
  cs.labels.reserve(static_cast<std::size_t>(pairs + 2 * n));
  int r = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++r) {
      const Vec2 diff = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      cs.A.block<1, 2>(r, 2 * i) = -2.0 * diff.transpose();
      cs.A.block<1, 2>(r, 2 * j) = 2.0 * diff.transpose();
      cs.b[r] = params.gamma * h_pair(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)], params.ds);
      cs.labels.push_back({RowLabel::Kind::pair, i, j, 0});
    }
  }
  for (int i = 0; i < n; ++i) {
    const auto rows = boundary_rows(x[static_cast<std::size_t>(i)], i, params);
    for (int axis = 0; axis < 2; ++axis, ++r) {
      cs.A.block<1, 2>(r, 2 * i) = rows.local.row(axis);
      cs.b[r] = rows.b[axis];
      cs.labels.push_back({RowLabel::Kind::boundary, i, -1, axis});
    }
  }
  return cs;
}

double activation_radius(const SafetyParams& params) {
  const double k = 2.0 * std::sqrt(2.0) * params.alpha / params.gamma;
  return k + std::sqrt(k * k + params.ds * params.ds);
}

namespace {

FilterResult filter_impl(std::span<const Vec2> u_hat, std::span<const Vec2> x, const SafetyParams& params,
                         const FilterOptions& options, std::map<RowLabel, double>* warm) {
  if (u_hat.size() != x.size())
    throw InputDomainError("filter: " + std::to_string(u_hat.size()) + " commands for " +
                           std::to_string(x.size()) + " robots");
  if (!all_finite(u_hat)) throw InputDomainError("filter: non-finite command");
  if (!all_finite(x)) throw InputDomainError("filter: non-finite state");

  const int n = static_cast<int>(x.size());
  FilterResult result;
  if (n == 0) return result;

  const double reach = activation_radius(params);
  const double reach_sq = reach * reach;

  std::vector<RowLabel> labels;
  std::vector<double> b_entries;
  std::vector<Eigen::Matrix<double, 1, 4>> pair_coeffs;
  labels.reserve(static_cast<std::size_t>(n * (n - 1) / 2 + 2 * n));

  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const Vec2& xi = x[static_cast<std::size_t>(i)];
      const Vec2& xj = x[static_cast<std::size_t>(j)];
      const double h = h_pair(xi, xj, params.ds);
      if (h < 0.0) {
        result.unsafe_state = true;
        result.violated.push_back({RowLabel::Kind::pair, i, j, 0});
      }
      if (options.prune && (xi - xj).squaredNorm() > reach_sq) continue;
      labels.push_back({RowLabel::Kind::pair, i, j, 0});
      b_entries.push_back(params.gamma * h);
    }
  }
  const std::size_t pair_rows = labels.size();
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d hb = h_boundary(x[static_cast<std::size_t>(i)], params.bounds);
    for (int axis = 0; axis < 2; ++axis) {
      if (hb[axis] < 0.0) {
        result.unsafe_state = true;
        result.violated.push_back({RowLabel::Kind::boundary, i, -1, axis});
      }
      labels.push_back({RowLabel::Kind::boundary, i, -1, axis});
      b_entries.push_back(params.gamma * hb[axis]);
    }
  }

  qp::Problem p;
  p.u_hat.resize(2 * n);
  for (int i = 0; i < n; ++i) p.u_hat.segment<2>(2 * i) = u_hat[static_cast<std::size_t>(i)];
  const auto m = static_cast<Eigen::Index>(labels.size());
  p.A = Eigen::MatrixXd::Zero(m, 2 * n);
  p.b.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto& lab = labels[static_cast<std::size_t>(r)];
    const Vec2& xi = x[static_cast<std::size_t>(lab.i)];
    if (static_cast<std::size_t>(r) < pair_rows) {
      const Vec2 diff = xi - x[static_cast<std::size_t>(lab.j)];
      p.A.block<1, 2>(r, 2 * lab.i) = -2.0 * diff.transpose();
      p.A.block<1, 2>(r, 2 * lab.j) = 2.0 * diff.transpose();
    } else if (lab.axis == 0) {
      p.A(r, 2 * lab.i) = 2.0 * xi.x() - params.bounds.right - params.bounds.left;
    } else {
      p.A(r, 2 * lab.i + 1) = 2.0 * xi.y() - params.bounds.top - params.bounds.bottom;
    }
    // Unsafe-state recovery: a negative barrier value only forbids moving
    // further into the violation.
    p.b[r] = std::max(b_entries[static_cast<std::size_t>(r)], 0.0);
  }
  p.box = params.alpha;
  p.tolerance = options.tolerance;
  p.max_iterations = options.max_iterations;

  Eigen::VectorXd seed;
  const Eigen::VectorXd* seed_ptr = nullptr;
  if (warm && !warm->empty()) {
    seed = Eigen::VectorXd::Zero(m);
    for (Eigen::Index r = 0; r < m; ++r) {
      auto it = warm->find(labels[static_cast<std::size_t>(r)]);
      if (it != warm->end()) seed[r] = it->second;
    }
    seed_ptr = &seed;
  }

  const qp::Solution sol = qp::solve(p, seed_ptr);
  if (warm) {
    warm->clear();
    for (Eigen::Index r = 0; r < m; ++r)
      if (sol.multipliers[r] > 0.0) (*warm)[labels[static_cast<std::size_t>(r)]] = sol.multipliers[r];
  }

  result.u.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) result.u[static_cast<std::size_t>(i)] = sol.u_star.segment<2>(2 * i);
  result.status = result.unsafe_state && sol.status == qp::Status::optimal ? qp::Status::infeasible_relaxed
                                                                           : sol.status;
  result.iterations = sol.iterations;
  result.max_violation = sol.max_violation;
  result.rows_used = static_cast<std::size_t>(m);
  return result;
}

}  // namespace

FilterResult filter(std::span<const Vec2> u_hat, std::span<const Vec2> x, const SafetyParams& params,
                    const FilterOptions& options) {
  return filter_impl(u_hat, x, params, options, nullptr);
}

SafetyFilter::SafetyFilter(SafetyParams params, FilterOptions options)
    : params_(params), options_(options) {
  params_.validate();
}

void SafetyFilter::set_params(const SafetyParams& params) {
  params.validate();
  params_ = params;
  warm_.clear();
}

FilterResult SafetyFilter::operator()(std::span<const Vec2> u_hat, std::span<const Vec2> x) {
  return filter_impl(u_hat, x, params_, options_, &warm_);
}

}  // namespace swarmlab::safety
