#include "swarmlab/qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "swarmlab/common.hpp"

namespace swarmlab::qp {

namespace {

// Row of A in compressed form; rows with no structural entries are kept so
// that multiplier indices line up with A.
struct SparseRow {
  std::vector<Eigen::Index> cols;
  std::vector<double> vals;
  double norm_sq = 0.0;

  double dot(const Eigen::VectorXd& u) const {
    double s = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) s += vals[k] * u[cols[k]];
    return s;
  }
  void axpy(double a, Eigen::VectorXd& u) const {
    for (std::size_t k = 0; k < cols.size(); ++k) u[cols[k]] += a * vals[k];
  }
};

std::vector<SparseRow> compress(const Eigen::MatrixXd& A) {
  std::vector<SparseRow> rows(static_cast<std::size_t>(A.rows()));
  for (Eigen::Index r = 0; r < A.rows(); ++r) {
    auto& row = rows[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < A.cols(); ++c) {
      const double v = A(r, c);
      if (v != 0.0) {
        row.cols.push_back(c);
        row.vals.push_back(v);
        row.norm_sq += v * v;
      }
    }
  }
  return rows;
}

struct DualState {
  Eigen::VectorXd u;
  Eigen::VectorXd lambda;  // row multipliers, >= 0
  Eigen::VectorXd nu;      // signed box multipliers: upper minus lower
};

struct HildrethResult {
  int sweeps = 0;
  bool converged = false;
};

HildrethResult hildreth(const Problem& p, const std::vector<SparseRow>& rows,
                        const Eigen::VectorXd& b, DualState& s) {
  const Eigen::Index n = p.dim();
  const double alpha = p.box;
  HildrethResult out;
  for (int sweep = 0; sweep < p.max_iterations; ++sweep) {
    double max_step = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.norm_sq == 0.0) continue;
      const auto ri = static_cast<Eigen::Index>(r);
      const double viol = row.dot(s.u) - b[ri];
      const double next = std::max(0.0, s.lambda[ri] + 2.0 * viol / row.norm_sq);
      const double d = next - s.lambda[ri];
      if (d != 0.0) {
        row.axpy(-0.5 * d, s.u);
        s.lambda[ri] = next;
        max_step = std::max(max_step, 0.5 * std::abs(d) * std::sqrt(row.norm_sq));
      }
    }
    if (std::isfinite(alpha)) {
      for (Eigen::Index k = 0; k < n; ++k) {
        const double free_val = s.u[k] + 0.5 * s.nu[k];
        const double clamped = std::clamp(free_val, -alpha, alpha);
        max_step = std::max(max_step, std::abs(clamped - s.u[k]));
        s.u[k] = clamped;
        s.nu[k] = 2.0 * (free_val - clamped);
      }
    }
    out.sweeps = sweep + 1;
    if (max_step <= p.tolerance) {
      out.converged = true;
      break;
    }
  }
  return out;
}

Eigen::VectorXd pack_multipliers(const DualState& s) {
  const Eigen::Index m = s.lambda.size();
  const Eigen::Index n = s.nu.size();
  Eigen::VectorXd out(m + 2 * n);
  out.head(m) = s.lambda;
  out.segment(m, n) = s.nu.cwiseMax(0.0);
  out.tail(n) = (-s.nu).cwiseMax(0.0);
  return out;
}

// Solves the equality-constrained projection on the active set identified by
// the dual iteration. Returns false when the candidate is not a KKT point.
bool polish(const Problem& p, const Eigen::VectorXd& b, DualState& s) {
  const Eigen::Index n = p.dim();
  const double alpha = p.box;
  std::vector<Eigen::Index> active_rows;
  for (Eigen::Index r = 0; r < s.lambda.size(); ++r)
    if (s.lambda[r] > 0.0) active_rows.push_back(r);

  std::vector<Eigen::Index> fixed, free;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (s.nu[k] != 0.0 && std::isfinite(alpha)) {
      fixed.push_back(k);
      u[k] = s.nu[k] > 0.0 ? alpha : -alpha;
    } else {
      free.push_back(k);
    }
  }

  const auto m = static_cast<Eigen::Index>(active_rows.size());
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    Eigen::MatrixXd G(m, static_cast<Eigen::Index>(free.size()));
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index r = active_rows[static_cast<std::size_t>(i)];
      double shifted = b[r];
      for (Eigen::Index k : fixed) shifted -= p.A(r, k) * u[k];
      double gu = 0.0;
      for (std::size_t j = 0; j < free.size(); ++j) {
        G(i, static_cast<Eigen::Index>(j)) = p.A(r, free[j]);
        gu += p.A(r, free[j]) * p.u_hat[free[j]];
      }
      rhs[i] = 2.0 * (gu - shifted);
    }
    const Eigen::MatrixXd M = G * G.transpose();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) return false;
    lambda = ldlt.solve(rhs);
    if (!lambda.allFinite()) return false;
    if ((M * lambda - rhs).lpNorm<Eigen::Infinity>() > 1e-10 * (1.0 + rhs.lpNorm<Eigen::Infinity>()))
      return false;
    if (lambda.minCoeff() < -1e-12) return false;
  }

  // A^T lambda over the active rows.
  Eigen::VectorXd at_lambda = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i)
    at_lambda += lambda[i] * p.A.row(active_rows[static_cast<std::size_t>(i)]).transpose();

  for (Eigen::Index k : free) {
    u[k] = p.u_hat[k] - 0.5 * at_lambda[k];
    if (std::abs(u[k]) > alpha + 1e-12) return false;
  }
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k : fixed) {
    nu[k] = 2.0 * (p.u_hat[k] - 0.5 * at_lambda[k] - u[k]);
    if (nu[k] * u[k] < -1e-12) return false;  // multiplier of the wrong sign
  }
  if (p.rows() > 0 && ((p.A * u) - b).maxCoeff() > 1e-12 * (1.0 + b.lpNorm<Eigen::Infinity>()))
    return false;

  s.u = u;
  s.lambda.setZero();
  for (Eigen::Index i = 0; i < m; ++i) s.lambda[active_rows[static_cast<std::size_t>(i)]] = std::max(0.0, lambda[i]);
  s.nu = nu;
  return true;
}

}  // namespace

std::string_view to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::max_iter: return "max_iter";
    case Status::infeasible_relaxed: return "infeasible_relaxed";
  }
  return "unknown";
}

void Problem::validate() const {
  if (A.cols() != u_hat.size() && A.rows() > 0)
    throw InputDomainError("qp: A has " + std::to_string(A.cols()) + " columns, expected " +
                           std::to_string(u_hat.size()));
  if (b.size() != A.rows())
    throw InputDomainError("qp: b has " + std::to_string(b.size()) + " entries, expected " +
                           std::to_string(A.rows()));
  if (!u_hat.allFinite() || !A.allFinite() || !b.allFinite())
    throw InputDomainError("qp: non-finite problem data");
  if (!(box > 0.0)) throw InputDomainError("qp: box bound must be positive");
  if (!(tolerance > 0.0)) throw InputDomainError("qp: tolerance must be positive");
  if (max_iterations <= 0) throw InputDomainError("qp: max_iterations must be positive");
}

double max_violation(const Problem& p, const Eigen::VectorXd& u) {
  double v = 0.0;
  if (p.rows() > 0) v = std::max(v, ((p.A * u) - p.b).maxCoeff());
  if (std::isfinite(p.box) && u.size() > 0) v = std::max(v, u.cwiseAbs().maxCoeff() - p.box);
  return std::max(v, 0.0);
}

double kkt_residual(const Problem& p, const Eigen::VectorXd& u, const Eigen::VectorXd& multipliers) {
  const Eigen::Index n = p.dim();
  const Eigen::Index m = p.rows();
  if (multipliers.size() != m + 2 * n) throw InputDomainError("kkt_residual: multiplier size mismatch");
  const auto lambda = multipliers.head(m);
  const auto upper = multipliers.segment(m, n);
  const auto lower = multipliers.tail(n);

  Eigen::VectorXd grad = 2.0 * (u - p.u_hat) + upper - lower;
  if (m > 0) grad += p.A.transpose() * lambda;
  double r = grad.lpNorm<Eigen::Infinity>();
  r = std::max(r, max_violation(p, u));
  if (m > 0) {
    const Eigen::VectorXd slack = (p.A * u) - p.b;
    r = std::max(r, lambda.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  if (std::isfinite(p.box) && n > 0) {
    const Eigen::VectorXd up_slack = u.array() - p.box;
    const Eigen::VectorXd lo_slack = -u.array() - p.box;
    r = std::max(r, upper.cwiseProduct(up_slack).cwiseAbs().maxCoeff());
    r = std::max(r, lower.cwiseProduct(lo_slack).cwiseAbs().maxCoeff());
  }
  if (multipliers.size() > 0) r = std::max(r, -multipliers.minCoeff());
  return r;
}

Solution solve(const Problem& p, const Eigen::VectorXd* warm_rows) {
  p.validate();
  const Eigen::Index n = p.dim();
  const Eigen::Index m = p.rows();
  if (warm_rows && warm_rows->size() != m) throw InputDomainError("qp: warm start size mismatch");

  const auto rows = compress(p.A);
  Eigen::VectorXd b = p.b;
  bool relaxed = false;
  for (Eigen::Index r = 0; r < m; ++r) {
    // 0 <= b_r can never hold for an empty row with negative b_r.
    if (rows[static_cast<std::size_t>(r)].norm_sq == 0.0 && b[r] < 0.0) {
      b[r] = 0.0;
      relaxed = true;
    }
  }

  auto run = [&](const Eigen::VectorXd& rhs, const Eigen::VectorXd* seed) {
    DualState s;
    s.lambda = seed ? Eigen::VectorXd(seed->cwiseMax(0.0)) : Eigen::VectorXd(Eigen::VectorXd::Zero(m));
    s.nu = Eigen::VectorXd::Zero(n);
    s.u = p.u_hat;
    if (m > 0) s.u -= 0.5 * (p.A.transpose() * s.lambda);
    const auto h = hildreth(p, rows, rhs, s);
    return std::pair{s, h};
  };

  auto [state, info] = run(b, warm_rows);
  Problem effective = p;
  effective.b = b;
  if (!info.converged && max_violation(effective, state.u) > p.tolerance) {
    // Feasible region looks empty: relax every row so that u = 0 is admissible.
    bool changed = false;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (b[r] < 0.0) {
        b[r] = 0.0;
        changed = true;
      }
    }
    if (changed) {
      relaxed = true;
      auto rerun = run(b, nullptr);
      const int previous = info.sweeps;
      state = rerun.first;
      info = rerun.second;
      info.sweeps += previous;
      effective.b = b;
    }
  }

  Solution sol;
  sol.iterations = info.sweeps;
  const double dual_residual = kkt_residual(effective, state.u, pack_multipliers(state));
  DualState candidate = state;
  if (polish(effective, b, candidate) &&
      kkt_residual(effective, candidate.u, pack_multipliers(candidate)) <= dual_residual) {
    state = candidate;
    sol.polished = true;
  }

  sol.u_star = state.u;
  sol.multipliers = pack_multipliers(state);
  sol.max_violation = max_violation(effective, state.u);
  if (relaxed)
    sol.status = Status::infeasible_relaxed;
  else if (info.converged || sol.polished)
    sol.status = sol.max_violation <= p.tolerance ? Status::optimal : Status::max_iter;
  else
    sol.status = Status::max_iter;
  return sol;
}

}  // namespace swarmlab::qp
