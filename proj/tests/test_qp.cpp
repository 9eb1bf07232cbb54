#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"

#include "vspsfc/qp.hpp"

#include <Eigen/Dense>

#include <random>

using namespace vspsfc;

TEST_CASE("unconstrained solutions match the direct linear solve") {
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 1 + trial % 6;
    MatrixXd m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = dist(rng);
    QpProblem qp;
    qp.h = m.transpose() * m + 0.5 * MatrixXd::Identity(n, n);
    qp.g = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return dist(rng); });
    qp.a_ineq = MatrixXd::Zero(0, n);
    qp.b_ineq = VectorXd::Zero(0);
    QpSolution sol = solve_qp(qp);
    VectorXd direct = qp.h.ldlt().solve(-qp.g);
    CHECK((sol.z - direct).lpNorm<Eigen::Infinity>() < 1e-10);
    CHECK(sol.kkt.max_rel() < 1e-8);
  }
}

TEST_CASE("two-variable problem with one active constraint matches the hand-worked point") {
  // min 1/2 (z0^2 + z1^2) - z0 - z1  subject to  z0 + z1 <= 1
  // unconstrained minimizer (1, 1) violates the row; the projection onto
  // z0 + z1 = 1 is (1/2, 1/2) with multiplier 1/2.
  QpProblem qp;
  qp.h = MatrixXd::Identity(2, 2);
  qp.g = VectorXd::Constant(2, -1.0);
  qp.a_ineq = MatrixXd::Ones(1, 2);
  qp.b_ineq = VectorXd::Ones(1);
  QpSolution sol = solve_qp(qp);
  CHECK(sol.z(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.z(1) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.lambda(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(sol.status == QpStatus::Optimal);
}

TEST_CASE("random small problems match the enumeration oracle") {
  std::mt19937 rng(17);
  std::normal_distribution<double> dist;
  std::uniform_int_distribution<int> nd(2, 6);
  std::uniform_int_distribution<int> md(1, 10);

  for (int trial = 0; trial < 200; ++trial) {
    int n = nd(rng);
    int m = md(rng);
    MatrixXd base(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) base(r, c) = dist(rng);
    QpProblem qp;
    qp.h = base.transpose() * base + 0.3 * MatrixXd::Identity(n, n);
    qp.g = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return dist(rng); });
    qp.a_ineq = MatrixXd::NullaryExpr(m, n, [&](Eigen::Index, Eigen::Index) { return dist(rng); });
    // make a known point strictly feasible so the region is non-empty
    VectorXd z0 = VectorXd::NullaryExpr(n, [&](Eigen::Index) { return 0.3 * dist(rng); });
    qp.b_ineq = qp.a_ineq * z0 + VectorXd::NullaryExpr(m, [&](Eigen::Index) { return 0.05 + std::abs(dist(rng)); });

    QpSolution sol = solve_qp(qp, z0);
    QpSolution ref = testing::brute_force_qp(qp);
    CAPTURE(trial);
    REQUIRE(std::isfinite(ref.objective));
    CHECK(sol.status == QpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(ref.objective).epsilon(1e-8));
    CHECK(sol.kkt.max_rel() < 1e-8);
  }
}

TEST_CASE("feasible start is recovered when zero is infeasible") {
  // min 1/2 z^2  s.t.  z >= 2  (written as -z <= -2)
  QpProblem qp;
  qp.h = MatrixXd::Identity(1, 1);
  qp.g = VectorXd::Zero(1);
  qp.a_ineq = MatrixXd::Constant(1, 1, -1.0);
  qp.b_ineq = VectorXd::Constant(1, -2.0);
  QpSolution sol = solve_qp(qp);
  CHECK(sol.z(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(sol.lambda(0) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("residual report is exact for a known KKT point") {
  QpProblem qp;
  qp.h = MatrixXd::Identity(2, 2);
  qp.g = VectorXd::Constant(2, -1.0);
  qp.a_ineq = MatrixXd::Ones(1, 2);
  qp.b_ineq = VectorXd::Ones(1);
  VectorXd z(2);
  z << 0.5, 0.5;
  VectorXd lambda(1);
  lambda << 0.5;
  KktResiduals r = kkt_residuals(qp, z, lambda);
  CHECK(r.stationarity < 1e-14);
  CHECK(r.primal < 1e-14);
  CHECK(r.complementarity < 1e-14);
}
