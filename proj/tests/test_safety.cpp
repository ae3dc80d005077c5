#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"

#include "swarmlab/safety.hpp"

using namespace swarmlab;
using namespace swarmlab::safety;
using doctest::Approx;

namespace {

SafetyParams params(double ds = 0.08, double gamma = 1.0, double alpha = 0.1) {
  SafetyParams p;
  p.ds = ds;
  p.gamma = gamma;
  p.alpha = alpha;
  return p;
}

Points random_safe_state(std::mt19937_64& rng, int n, const SafetyParams& p, double margin) {
  std::uniform_real_distribution<double> ux(p.bounds.left + margin, p.bounds.right - margin);
  std::uniform_real_distribution<double> uy(p.bounds.bottom + margin, p.bounds.top - margin);
  Points x;
  while (static_cast<int>(x.size()) < n) {
    const Vec2 c(ux(rng), uy(rng));
    bool ok = true;
    for (const auto& q : x) ok = ok && (q - c).norm() > p.ds + margin;
    if (ok) x.push_back(c);
  }
  return x;
}

}  // namespace

TEST_CASE("barrier values") {
  CHECK(h_pair({0, 0}, {1, 0}, 0.1) == Approx(0.99));
  CHECK(h_pair({0.3, 0.3}, {0.3, 0.3}, 0.1) == Approx(-0.01));
  CHECK(h_pair({0, 0}, {0.1, 0}, 0.1) == Approx(0.0).epsilon(1e-15));
  const auto hb = h_boundary({0, 0}, Bounds{});
  CHECK(hb[0] == Approx(0.36));
  CHECK(hb[1] == Approx(0.36));
}

TEST_CASE("pairwise rows") {
  const Points x{{0, 0}, {1, 0}};
  const auto row = pairwise_row(x, 0, 1, params(0.1));
  CHECK(row.a[0] == Approx(2.0));
  CHECK(row.a[1] == 0.0);
  CHECK(row.a[2] == Approx(-2.0));
  CHECK(row.a[3] == 0.0);
  CHECK(row.b == Approx(0.99));

  const Points same{{0.2, 0.1}, {0.2, 0.1}};
  const auto degenerate = pairwise_row(same, 0, 1, params(0.1));
  CHECK(degenerate.a.isZero());
  CHECK(degenerate.b == Approx(-0.01));

  CHECK_THROWS_AS(pairwise_row(x, 1, 1, params()), IndexError);
  CHECK_THROWS_AS(pairwise_row(x, 0, 2, params()), IndexError);
}

TEST_CASE("zero command satisfies every row of a safe state") {
  std::mt19937_64 rng(1);
  const auto p = params();
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_safe_state(rng, 6, p, 0.0);
    const auto cs = assemble(x, p);
    CHECK(cs.b.minCoeff() >= 0.0);
  }
}

TEST_CASE("boundary rows") {
  auto rows = boundary_rows({0, 0}, 0, params());
  CHECK(rows.local.isZero());
  CHECK(rows.b[0] == Approx(0.36));
  CHECK(rows.b[1] == Approx(0.36));
  rows = boundary_rows({0.6, 0}, 0, params());
  CHECK(rows.local(0, 0) == Approx(1.2));
  CHECK(rows.b[0] == Approx(0.0));
  SafetyParams shifted = params();
  shifted.bounds = {1, 3, -2, 0};
  rows = boundary_rows({2, -1}, 0, shifted);
  CHECK(rows.local.isZero());
}

TEST_CASE("assemble matches the independent construction") {
  for (int n : {1, 4, 20}) {
    std::mt19937_64 rng(static_cast<unsigned>(n));
    const auto p = params();
    const auto x = random_safe_state(rng, n, p, 0.0);
    const auto cs = assemble(x, p);
    CHECK(cs.rows() == n * (n - 1) / 2 + 2 * n);
    CHECK(cs.labels.size() == static_cast<std::size_t>(cs.rows()));
    const auto ref = oracle::certificate(x, p.ds, p.gamma, -0.6, 0.6, -0.6, 0.6);
    CHECK((cs.A - ref.A).lpNorm<Eigen::Infinity>() < 1e-15);
    CHECK((cs.b - ref.b).lpNorm<Eigen::Infinity>() < 1e-15);
    for (int r = 0; r < n * (n - 1) / 2; ++r) CHECK((cs.A.row(r).array() != 0.0).count() <= 4);
  }
}

TEST_CASE("scaling gamma scales b only") {
  std::mt19937_64 rng(2);
  const auto x = random_safe_state(rng, 5, params(), 0.0);
  const auto a = assemble(x, params(0.08, 1.0));
  const auto b = assemble(x, params(0.08, 2.5));
  CHECK(a.A == b.A);
  CHECK((2.5 * a.b - b.b).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("filter examples") {
  const auto p = params(0.1, 1.0, 0.1);
  const Points x{{-0.1, 0}, {0.1, 0}};
  const Commands u_hat{{0.1, 0}, {-0.1, 0}};
  const auto r = filter(u_hat, x, p);
  CHECK(r.status == qp::Status::optimal);
  CHECK_FALSE(r.unsafe_state);
  CHECK(r.u[0].x() == Approx(0.0375).epsilon(1e-9));
  CHECK(r.u[1].x() == Approx(-0.0375).epsilon(1e-9));
  CHECK(std::abs(r.u[0].y()) < 1e-12);

  const Points far{{-0.4, 0}, {0.4, 0}};
  const Commands gentle{{0.05, 0.02}, {-0.03, 0.01}};
  const auto free_run = filter(gentle, far, p);
  for (std::size_t i = 0; i < 2; ++i) CHECK((free_run.u[i] - gentle[i]).norm() == 0.0);

  const Commands zero(2, Vec2::Zero());
  const auto still = filter(zero, x, p);
  for (const auto& u : still.u) CHECK(u.norm() == 0.0);
}

TEST_CASE("reflection symmetry") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> cmd(-0.1, 0.1);
  const auto p = params();
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_safe_state(rng, 4, p, 0.0);
    Commands u(4);
    for (auto& ui : u) ui = {cmd(rng), cmd(rng)};
    Points xr = x;
    Commands ur = u;
    for (auto& v : xr) v.x() = -v.x();
    for (auto& v : ur) v.x() = -v.x();
    const auto a = filter(u, x, p);
    const auto b = filter(ur, xr, p);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(a.u[i].x() == Approx(-b.u[i].x()).epsilon(1e-6));
      CHECK(std::abs(a.u[i].y() - b.u[i].y()) < 1e-6);
    }
  }
}

TEST_CASE("pruning never changes the answer") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> cmd(-0.2, 0.2);
  const auto p = params();
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_safe_state(rng, 10, p, 0.0);
    Commands u(10);
    for (auto& ui : u) ui = {cmd(rng), cmd(rng)};
    const auto pruned = filter(u, x, p, {true});
    const auto full = filter(u, x, p, {false});
    CHECK(pruned.rows_used <= full.rows_used);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK((pruned.u[i] - full.u[i]).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("pruned pairs are slack for every command in the box") {
  // At the activation radius the worst-case left-hand side just meets b.
  for (double gamma : {0.5, 1.0, 3.0}) {
    const auto p = params(0.08, gamma, 0.1);
    const double d = activation_radius(p);
    const double worst_lhs = 2.0 * d * 2.0 * std::sqrt(2.0) * p.alpha;
    CHECK(gamma * (d * d - p.ds * p.ds) == Approx(worst_lhs).epsilon(1e-12));
    const double beyond = d * 1.001;
    CHECK(gamma * (beyond * beyond - p.ds * p.ds) > 2.0 * beyond * 2.0 * std::sqrt(2.0) * p.alpha);
  }
}

TEST_CASE("minimal invasiveness on strictly safe commands") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> cmd(-0.1, 0.1);
  const auto p = params();
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto x = random_safe_state(rng, 5, p, 0.0);
    Commands u(5);
    for (auto& ui : u) ui = {cmd(rng), cmd(rng)};
    const auto cs = assemble(x, p);
    Eigen::VectorXd flat(10);
    for (int i = 0; i < 5; ++i) flat.segment<2>(2 * i) = u[static_cast<std::size_t>(i)];
    if (((cs.A * flat) - cs.b).maxCoeff() > -1e-9) continue;
    ++checked;
    const auto r = filter(u, x, p);
    for (std::size_t i = 0; i < 5; ++i) CHECK((r.u[i] - u[i]).lpNorm<Eigen::Infinity>() <= 1e-6);
  }
  CHECK(checked > 100);
}

TEST_CASE("unsafe states are flagged and relaxed") {
  const auto p = params();
  const Points x{{0, 0}, {0.05, 0}};
  const Commands u{{0.1, 0}, {-0.1, 0}};
  const auto r = filter(u, x, p);
  CHECK(r.unsafe_state);
  CHECK(r.status == qp::Status::infeasible_relaxed);
  REQUIRE(r.violated.size() == 1);
  CHECK(r.violated[0].kind == RowLabel::Kind::pair);
  // The robots may not approach further.
  CHECK(r.u[0].x() - r.u[1].x() <= 1e-9);

  const Points coincident{{0.1, 0.1}, {0.1, 0.1}};
  const auto c = filter(u, coincident, p);
  CHECK(c.unsafe_state);
  for (const auto& ui : c.u) CHECK(ui.allFinite());
}

TEST_CASE("stateful filter matches the stateless one") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> cmd(-0.1, 0.1);
  const auto p = params();
  SafetyFilter f(p);
  auto x = random_safe_state(rng, 8, p, 0.0);
  for (int k = 0; k < 200; ++k) {
    Commands u(8);
    for (auto& ui : u) ui = {cmd(rng), cmd(rng)};
    const auto warm = f(u, x);
    const auto cold = filter(u, x, p);
    for (std::size_t i = 0; i < 8; ++i) CHECK((warm.u[i] - cold.u[i]).lpNorm<Eigen::Infinity>() <= 1e-6);
    for (std::size_t i = 0; i < 8; ++i) x[i] += 0.01 * warm.u[i];
  }
}

TEST_CASE("parameter invariants") {
  CHECK_THROWS_AS(params(-1).validate(), ParameterError);
  CHECK_THROWS_AS(params(0.08, 0).validate(), ParameterError);
  CHECK_THROWS_AS(params(0.08, 1, 0).validate(), ParameterError);
  SafetyParams narrow = params(0.7);
  CHECK_THROWS_AS(narrow.validate(), ParameterError);
  SafetyParams flipped = params();
  flipped.bounds = {1, -1, -1, 1};
  CHECK_THROWS_AS(flipped.validate(), ParameterError);
  CHECK_THROWS_AS(filter(Commands{{NAN, 0}}, Points{{0, 0}}, params()), InputDomainError);
  CHECK_THROWS_AS(filter(Commands{{0, 0}}, Points{{0, 0}, {0.3, 0}}, params()), InputDomainError);
}
