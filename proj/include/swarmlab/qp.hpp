#pragma once

#include <limits>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

namespace swarmlab::qp {

/// Projection problem
///
///   minimize   sum_k (u_k - u_hat_k)^2
///   subject to A u <= b,  |u_k| <= box  for every component k.
///
/// The Hessian is 2 I and is never stored.
struct Problem {
  Eigen::VectorXd u_hat;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double box = std::numeric_limits<double>::infinity();
  double tolerance = 1e-8;
  int max_iterations = 10000;

  Eigen::Index dim() const { return u_hat.size(); }
  Eigen::Index rows() const { return A.rows(); }

  /// Throws InputDomainError on inconsistent dimensions or non-finite data.
  void validate() const;
};

enum class Status { optimal, max_iter, infeasible_relaxed };

std::string_view to_string(Status s);

struct Solution {
  Eigen::VectorXd u_star;
  /// Layout: [row multipliers (rows); upper-box (dim); lower-box (dim)].
  Eigen::VectorXd multipliers;
  Status status = Status::optimal;
  int iterations = 0;
  double max_violation = 0.0;
  bool polished = false;
};

/// Dual coordinate ascent (Hildreth) followed by an active-set polish.
///
/// `warm_rows`, when given, seeds the row multipliers. The fixed point does
/// not depend on the seed.
Solution solve(const Problem& p, const Eigen::VectorXd* warm_rows = nullptr);

/// Largest of the stationarity, primal-feasibility and complementary
/// slackness residuals. `multipliers` uses the `Solution::multipliers` layout.
double kkt_residual(const Problem& p, const Eigen::VectorXd& u, const Eigen::VectorXd& multipliers);

/// Largest violation of A u <= b and of the box, in the units of b.
double max_violation(const Problem& p, const Eigen::VectorXd& u);

}  // namespace swarmlab::qp
