#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "test_util.hpp"

#include "vspsfc/ampc.hpp"

#include <Eigen/Dense>

#include <cmath>

using namespace vspsfc;

TEST_CASE("reference target: single unit") {
  double ref = reference_target({{5.0, 0.05}}, 0.0, 0.1);
  CHECK(ref == doctest::Approx(0.005).epsilon(1e-14));
}

TEST_CASE("reference target: huge damping pushes the target to zero") {
  double ref = reference_target({{5.0, 0.05}}, 1e12, 0.1);
  CHECK(std::abs(ref) < 1e-11);
}

TEST_CASE("reference target: two identical units") {
  double ref = reference_target({{1.0, 0.05}, {1.0, 0.05}}, 0.0, 0.1);
  CHECK(ref == doctest::Approx(2.0 / 40.0 * 0.1).epsilon(1e-14));
}

namespace {

struct FrozenSetup {
  SystemModel sys;
  LinearModel lin;
  AmpcConfig cfg;
  ConstraintSet cs;  // empty rows, horizons set
  ReferenceTargets refs;

  explicit FrozenSetup(double d_load, int horizon, int control_horizon, double rho)
      : sys(testing::test_system()) {
    OperatingPoint op{sys.equilibrium_state(), sys.equilibrium_input(), d_load};
    lin = discretize(linearize_at(op, sys), 0.1, op, sys.measurement_matrix());
    cfg = testing::test_ampc_config();
    cfg.prediction_horizon = horizon;
    cfg.control_horizon = control_horizon;
    cfg.input_penalty = rho;
    cfg.weight_pcc = 1.0;
    cfg.weight_rotor = {0.1, 0.1};
    cs.horizon = horizon;
    cs.control_horizon = control_horizon;
    refs.domega_pcc = -0.005;
    refs.omega_r = VectorXd::Zero(2);
    for (int i = 0; i < 2; ++i) refs.omega_r(i) = sys.equilibrium_state()(sys.idx().unit_omega(i));
  }

  double stage_cost(const VectorXd& x) const {
    double j = 0.5 * cfg.weight_pcc * std::pow(x(sys.idx().domega()) - refs.domega_pcc, 2);
    for (int i = 0; i < 2; ++i)
      j += 0.5 * cfg.weight_rotor[static_cast<std::size_t>(i)] *
           std::pow(x(sys.idx().unit_omega(i)) - refs.omega_r(i), 2);
    return j;
  }
};

}  // namespace

TEST_CASE("one-step horizon matches the analytic normal-equation solution") {
  FrozenSetup f(1.0, 1, 1, 1e-4);
  f.cfg.weight_rotor = {0.0, 0.0};  // track frequency only

  QpBuild qb = build_qp(f.lin, f.cs, f.sys.equilibrium_state(), f.refs, f.cfg, f.sys.idx());
  QpSolution sol = solve_qp(qb.qp, qb.z_start);

  // J = 1/2 p (gamma'U + c)^2 + const(m=0) + 1/2 rho |U|^2, so the minimizer
  // is U = -p c gamma / (rho + p |gamma|^2)
  const int iw = f.sys.idx().domega();
  Eigen::RowVectorXd gamma = f.lin.b.row(iw);
  double c = f.sys.equilibrium_state()(iw) + f.lin.increment_drift()(iw) - f.refs.domega_pcc;
  VectorXd u_expected =
      -f.cfg.weight_pcc * c * gamma.transpose() / (f.cfg.input_penalty + f.cfg.weight_pcc * gamma.squaredNorm());
  CHECK((sol.z.head(4) - u_expected).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("references equal to the free trajectory give zero commands") {
  FrozenSetup f(0.0, 10, 4, 1e-4);
  // at equilibrium with no disturbance the free trajectory is constant, so
  // tracking the equilibrium values is already optimal
  f.refs.domega_pcc = 0.0;
  QpBuild qb = build_qp(f.lin, f.cs, f.sys.equilibrium_state(), f.refs, f.cfg, f.sys.idx());
  QpSolution sol = solve_qp(qb.qp, qb.z_start);
  CHECK(sol.z.lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK(sol.objective == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("the condensed Hessian is symmetric positive definite") {
  SystemModel sys = testing::test_system();
  OperatingPoint op{sys.equilibrium_state(), sys.equilibrium_input(), 1.0};
  LinearModel lin = discretize(linearize_at(op, sys), 0.1, op, sys.measurement_matrix());
  AmpcConfig cfg = testing::test_ampc_config();
  ConstraintSet cs = build_constraint_set(op, sys.plant().units, sys.idx(), cfg.prediction_horizon,
                                          cfg.control_horizon, cfg.dt_ctrl);
  ReferenceTargets refs{-0.005, VectorXd::Constant(2, 0.95)};
  QpBuild qb = build_qp(lin, cs, op.x, refs, cfg, sys.idx());
  CHECK((qb.qp.h - qb.qp.h.transpose()).lpNorm<Eigen::Infinity>() < 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(qb.qp.h);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("objective starting at the next step has the same minimizer") {
  FrozenSetup f(1.0, 12, 5, 1e-4);
  QpBuild a = build_qp(f.lin, f.cs, f.sys.equilibrium_state(), f.refs, f.cfg, f.sys.idx());
  f.cfg.objective_from_step_one = true;
  QpBuild b = build_qp(f.lin, f.cs, f.sys.equilibrium_state(), f.refs, f.cfg, f.sys.idx());
  QpSolution sa = solve_qp(a.qp, a.z_start);
  QpSolution sb = solve_qp(b.qp, b.z_start);
  CHECK((sa.z - sb.z).lpNorm<Eigen::Infinity>() < 1e-9);
  // the two objectives differ exactly by the constant current-step error term
  double delta = a.qp.constant - b.qp.constant;
  CHECK(sa.objective - sb.objective == doctest::Approx(delta).epsilon(1e-9));
}

TEST_CASE("receding-horizon tail cost bounds the re-solved objective on a frozen model") {
  FrozenSetup f(1.0, 8, 8, 0.0);
  const auto& idx = f.sys.idx();
  const int nu = idx.n_u();

  QpBuild qb = build_qp(f.lin, f.cs, f.sys.equilibrium_state(), f.refs, f.cfg, idx);
  QpSolution sol = solve_qp(qb.qp, qb.z_start);

  // apply the first move on the frozen model
  VectorXd u0 = f.sys.equilibrium_input() + sol.z.segment(0, nu);
  VectorXd x1 = f.lin.step(f.sys.equilibrium_state(), u0, 1.0);

  // shifted tail: previous moves 1..N-1 then hold the last one
  double tail = f.stage_cost(x1);
  VectorXd x = x1;
  for (int m = 1; m <= 8; ++m) {
    VectorXd um = f.sys.equilibrium_input() + sol.z.segment(std::min(m, 7) * nu, nu);
    x = f.lin.step(x, um, 1.0);
    tail += f.stage_cost(x);
  }

  QpBuild qb1 = build_qp(f.lin, f.cs, x1, f.refs, f.cfg, idx);
  QpSolution sol1 = solve_qp(qb1.qp, qb1.z_start);
  CHECK(sol1.objective <= tail + 1e-8);
}

TEST_CASE("control cycle stays quiet at equilibrium") {
  SystemModel sys = testing::test_system();
  AmpcController ctl(sys, testing::test_ampc_config());
  VectorXd y = sys.measure(sys.equilibrium_state());
  const VectorXd u0 = sys.equilibrium_input();
  for (int k = 0; k < 100; ++k) {
    ControlOutput out = ctl.cycle(y);
    CHECK(!out.latched);
    CHECK((out.u_applied - u0).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(std::abs(ctl.imbalance_estimate()) < 1e-9);
  }
}

TEST_CASE("identical measurement sequences give bit-identical outputs") {
  SystemModel sys = testing::test_system();
  AmpcController a(sys, testing::test_ampc_config());
  AmpcController b(sys, testing::test_ampc_config());
  VectorXd y = sys.measure(sys.equilibrium_state());
  for (int k = 0; k < 10; ++k) {
    y(0) -= 0.0005;  // deepening frequency deviation
    ControlOutput oa = a.cycle(y);
    ControlOutput ob = b.cycle(y);
    REQUIRE(oa.u_applied.size() == ob.u_applied.size());
    for (Eigen::Index i = 0; i < oa.u_applied.size(); ++i) CHECK(oa.u_applied(i) == ob.u_applied(i));
    CHECK(oa.objective == ob.objective);
    for (Eigen::Index r = 0; r < oa.dp_star.rows(); ++r)
      for (Eigen::Index c = 0; c < oa.dp_star.cols(); ++c) CHECK(oa.dp_star(r, c) == ob.dp_star(r, c));
  }
}

TEST_CASE("commands always satisfy the hard vane rows exactly") {
  SystemModel sys = testing::test_system();
  AmpcConfig cfg = testing::test_ampc_config();
  AmpcController ctl(sys, cfg);
  VectorXd y = sys.measure(sys.equilibrium_state());
  VectorXd u_prev = sys.equilibrium_input();
  const auto& idx = sys.idx();
  const double rate = sys.plant().units[0].g_rate_max * cfg.dt_ctrl;
  for (int k = 0; k < 30; ++k) {
    y(0) -= 0.002;  // drive hard enough to saturate the vane rate
    ControlOutput out = ctl.cycle(y);
    for (int i = 0; i < sys.n_units(); ++i) {
      double g_cmd = out.u_applied(idx.iu_g(i));
      CHECK(g_cmd >= 0.0);
      CHECK(g_cmd <= 1.0);
      CHECK(std::abs(g_cmd - u_prev(idx.iu_g(i))) <= rate + 1e-12);
    }
    u_prev = out.u_applied;
  }
}
