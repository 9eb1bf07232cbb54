#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

#include "vspsfc/baselines.hpp"
#include "vspsfc/scenario.hpp"

#include <cmath>

using namespace vspsfc;

namespace {

ScenarioConfig small_scenario(const std::string& mode, double duration) {
  ScenarioConfig cfg;
  cfg.grid = testing::test_grid_params();
  cfg.plant = testing::test_plant();
  cfg.controller.mode = mode;
  cfg.controller.ampc = testing::test_ampc_config();
  cfg.controller.vic = {6.0, 15.0, 0.1, 1.5, 0.4};
  cfg.controller.fsps = {0.04, 0.2};
  cfg.disturbance.events = {{0.0, 3.0}};
  cfg.sim.duration = duration;
  cfg.sim.dt_truth = 1e-3;
  cfg.sim.dt_ctrl = 0.1;
  cfg.sim.output_dt = 0.01;
  cfg.canonical = "test-scenario";
  cfg.canonical_ex_controller = "test-scenario-ex";
  return cfg;
}

}  // namespace

TEST_CASE("fsps plant holds its equilibrium without disturbance") {
  FspsModel sys(testing::test_grid_params(), testing::test_plant(), {0.04, 0.2});
  VectorXd x = sys.equilibrium_state();
  for (int k = 0; k < 3000; ++k) x = sys.fsps_plant_step(x, 0.0, 1e-3).x;
  CHECK((x - sys.equilibrium_state()).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("fsps unit speed is the grid frequency and its inertia joins the system") {
  GridParams gp = testing::test_grid_params();
  PlantConfig pl = testing::test_plant();
  FspsModel sys(gp, pl, {0.04, 0.2});
  double extra = 0.0;
  for (const auto& u : pl.units) extra += u.h_inertia * u.s_mva / gp.s_base_mva;
  CHECK(sys.grid().inertia() == doctest::Approx(gp.h_sys + extra));

  // the electrical trace follows the torque balance at the common speed
  VectorXd x = sys.equilibrium_state();
  for (int k = 0; k < 2000; ++k) x = sys.fsps_plant_step(x, 3.0, 1e-3).x;
  double domega_dot = sys.frequency_derivative(x, 3.0);
  for (int i = 0; i < sys.n_units(); ++i) {
    double speed = 1.0 + x(sys.grid().idx_domega());
    double expected = sys.mechanical_power(x, i) -
                      2.0 * pl.units[static_cast<std::size_t>(i)].h_inertia * speed * domega_dot;
    CHECK(sys.electrical_power(x, i, 3.0) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("fsps governor opens the vane when frequency drops") {
  FspsModel sys(testing::test_grid_params(), testing::test_plant(), {0.04, 0.2});
  VectorXd x = sys.equilibrium_state();
  for (int k = 0; k < 4000; ++k) x = sys.fsps_plant_step(x, 3.0, 1e-3).x;
  CHECK(x(sys.grid().idx_domega()) < -1e-4);
  for (int i = 0; i < sys.n_units(); ++i)
    CHECK(x(sys.idx_gate(i)) > sys.equilibrium_state()(sys.idx_gate(i)) + 1e-4);
}

TEST_CASE("vic command is zero for a flat history") {
  VicConfig cfg{10.0, 20.0, 0.1, 1.5, 0.4};
  std::vector<double> hist(50, 0.0);
  CHECK(vic_command(hist, cfg, 0.1) == 0.0);
  std::vector<double> level(50, -0.004);
  // pre-charged washout: droop term only
  CHECK(vic_command(level, cfg, 0.1) == doctest::Approx(20.0 * 0.004).epsilon(1e-9));
}

TEST_CASE("vic command on a frequency ramp combines inertia and droop terms") {
  VicConfig cfg{10.0, 20.0, 0.1, 1.5, 0.4};
  const double a = 0.002;  // pu/s decline
  // the sampled washout's ramp gain converges to unity as dt shrinks
  const double dt = 0.002;
  std::vector<double> hist;
  double latest = 0.0;
  for (int k = 0; k < 1000; ++k) {
    latest = -a * (k * dt);
    hist.push_back(latest);
  }
  double expected = cfg.k_inertia * a + cfg.k_droop * (-latest);
  CHECK(vic_command(hist, cfg, dt) == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("washout step response matches the analytic first-order decay") {
  VicConfig cfg{1.0, 0.0, 0.1, 1.5, 0.4};
  const double dt = 0.02;
  const double step = -0.01;
  std::vector<double> hist{0.0};
  for (int k = 1; k <= 60; ++k) {
    hist.push_back(step);
    double cmd = vic_command(hist, cfg, dt);
    // step applied at sample 1; derivative path decays from there
    double t_since = (k - 1) * dt;
    double analytic = -(step / cfg.washout_time) * std::exp(-t_since / cfg.washout_time);
    CHECK(cmd == doctest::Approx(analytic).epsilon(0.01));
  }
}

TEST_CASE("vic command requires at least two samples") {
  VicConfig cfg{1.0, 1.0, 0.1, 1.5, 0.4};
  std::vector<double> hist{0.0};
  CHECK_THROWS_AS(vic_command(hist, cfg, 0.1), Error);
}

TEST_CASE("vic controller holds dispatch at equilibrium") {
  SystemModel sys = testing::test_system();
  VicController ctl(sys, {6.0, 15.0, 0.1, 1.5, 0.4}, 0.1);
  VectorXd y = sys.measure(sys.equilibrium_state());
  for (int k = 0; k < 50; ++k) {
    VectorXd u = ctl.cycle(y);
    CHECK((u - sys.equilibrium_input()).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("tuned vic beats the untuned zero-gain baseline on the step scenario") {
  ScenarioConfig scenario = small_scenario("vic", 15.0);

  ScenarioConfig zero = scenario;
  zero.controller.vic.k_inertia = 0.0;
  zero.controller.vic.k_droop = 0.0;
  double nadir_zero = std::abs(run_scenario(zero).metrics.nadir);

  PatternSearchConfig ps;
  ps.k0 = VectorXd::Zero(2);
  ps.k0 << 5.0, 10.0;
  ps.lower = VectorXd::Zero(2);
  ps.upper = VectorXd::Zero(2);
  ps.upper << 20.0, 30.0;
  ps.scale = VectorXd::Zero(2);
  ps.scale << 5.0, 7.5;
  ps.initial_mesh = 1.0;
  ps.eps = 0.1;  // coarse: enough to establish the ordering
  VicConfig tuned = tune_vic(scenario, 20.0, 30.0, &ps);

  ScenarioConfig best = scenario;
  best.controller.vic = tuned;
  double nadir_tuned = std::abs(run_scenario(best).metrics.nadir);
  CHECK(nadir_tuned < nadir_zero);
}

TEST_CASE("zero-disturbance tuning is deterministic under a flat objective") {
  ScenarioConfig scenario = small_scenario("vic", 2.0);
  scenario.disturbance.events.clear();

  PatternSearchConfig ps;
  ps.k0 = VectorXd::Zero(2);
  ps.k0 << 3.0, 6.0;
  ps.lower = VectorXd::Zero(2);
  ps.upper = VectorXd::Constant(2, 10.0);
  ps.initial_mesh = 1.0;
  ps.eps = 0.3;
  VicConfig a = tune_vic(scenario, 10.0, 10.0, &ps);
  VicConfig b = tune_vic(scenario, 10.0, 10.0, &ps);
  CHECK(a.k_inertia == b.k_inertia);
  CHECK(a.k_droop == b.k_droop);
  CHECK(a.k_inertia >= 0.0);
  CHECK(a.k_inertia <= 10.0);
}

TEST_CASE("enlarging the gain bounds never worsens the achieved nadir") {
  ScenarioConfig scenario = small_scenario("vic", 12.0);

  auto run_with_bounds = [&](double hi) {
    PatternSearchConfig ps;
    ps.k0 = VectorXd::Zero(2);
    ps.k0 << 1.0, 1.0;
    ps.lower = VectorXd::Zero(2);
    ps.upper = VectorXd::Constant(2, hi);
    ps.scale = VectorXd::Constant(2, 2.0);
    ps.initial_mesh = 1.0;
    ps.eps = 0.2;
    VicConfig tuned = tune_vic(scenario, hi, hi, &ps);
    ScenarioConfig c = scenario;
    c.controller.vic = tuned;
    return std::abs(run_scenario(c).metrics.nadir);
  };

  double narrow = run_with_bounds(2.0);
  double wide = run_with_bounds(16.0);
  CHECK(wide <= narrow + 1e-12);
}
