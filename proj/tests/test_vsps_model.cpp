#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"

#include "vspsfc/vsps.hpp"

#include <cmath>
#include <vector>

using namespace vspsfc;

namespace {
const VspsUnitParams prm = testing::test_unit_params();
}

TEST_CASE("dfim algebra: zero power and zero reactive power give zero stator current") {
  DfimCurrents c = dfim_algebra(0.0, 1.0, 0.95, prm);
  CHECK(c.i_sd == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(c.i_sq == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("dfim algebra: q-axis rotor current is the magnetizing current") {
  for (double w_pcc : {0.98, 1.0, 1.02}) {
    DfimCurrents c = dfim_algebra(0.7, w_pcc, 0.95, prm);
    CHECK(c.i_rq == doctest::Approx(-kStatorVoltage / (prm.l_m * w_pcc)).epsilon(1e-14));
  }
}

TEST_CASE("dfim algebra: rotor voltage amplitude vanishes at synchronous speed") {
  DfimCurrents c = dfim_algebra(0.8, 1.0, 1.0, prm);
  CHECK(c.u_r_amplitude == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("dfim algebra: reconstructing electrical power from i_rd round-trips") {
  for (double p_e : {0.1, 0.6, 0.95}) {
    for (double w_r : {0.9, 1.0, 1.1}) {
      double w_pcc = 0.99;
      DfimCurrents c = dfim_algebra(p_e, w_pcc, w_r, prm);
      double p_back = prm.l_m * kStatorVoltage * w_r / (prm.l_s * w_pcc) * c.i_rd;
      CHECK(p_back == doctest::Approx(p_e).epsilon(1e-10));
    }
  }
}

TEST_CASE("dfim algebra rejects non-physical frequencies") {
  CHECK_THROWS_AS(dfim_algebra(0.5, 0.0, 1.0, prm), Error);
  CHECK_THROWS_AS(dfim_algebra(0.5, 1.0, -0.5, prm), Error);
}

TEST_CASE("coupling term characterizes 95 to 100 percent of the exact rotor voltage") {
  // rated-range sweep at the four off-synchronous speeds
  for (double w_r : {0.85, 0.9, 1.1, 1.15}) {
    double p_max = std::min(1.0, prm.i_s_rated * kStatorVoltage * w_r);
    for (double p_e = 0.6; p_e <= p_max + 1e-12; p_e += (p_max - 0.6) / 12.0) {
      double u_exact = exact_rotor_voltage(p_e, 1.0, w_r, prm);
      double ratio = coupling_term_magnitude(p_e, 1.0, w_r, prm) / u_exact;
      CAPTURE(w_r);
      CAPTURE(p_e);
      CHECK(ratio >= 0.95);
      CHECK(ratio <= 1.0);
    }
  }
}

TEST_CASE("unit params validation checks the leakage coefficient") {
  VspsUnitParams bad = prm;
  bad.sigma += 1e-6;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_NOTHROW(prm.validate());
}

TEST_CASE("balanced swing keeps rotor speed constant") {
  HillChart chart = testing::test_chart();
  // start from a matched mechanical/electrical power point
  double gate = 0.63, h = 1.0 / (1.0 + prm.friction * gate * gate);
  double omega = 0.95;
  double p_bal = chart.power(gate, omega, h, true).p_m;
  VspsState s{omega, p_bal, p_bal, gate, gate * std::sqrt(h), h};
  UnitInputs in{p_bal, gate};
  for (int k = 0; k < 2000; ++k) s = step_unit(s, in, 1.0, 1e-3, prm, chart).state;
  CHECK(s.omega_r == doctest::Approx(omega).epsilon(1e-9));
}

TEST_CASE("electrical power follows the first-order tracking lag") {
  HillChart chart = testing::test_chart();
  double gate = 0.63, h = 1.0 / (1.0 + prm.friction * gate * gate);
  double p0 = chart.power(gate, 0.95, h, true).p_m;
  VspsState s{0.95, p0, p0, gate, gate * std::sqrt(h), h};
  UnitInputs in{p0 + 0.1, gate};  // gate command frozen
  double t = 0.0;
  while (t < prm.t_p - 1e-9) {
    s = step_unit(s, in, 1.0, 1e-3, prm, chart).state;
    t += 1e-3;
  }
  double rise = (s.p_e - p0) / 0.1;
  CHECK(rise == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.02));
}

TEST_CASE("vane slew saturates at the configured rate") {
  HillChart chart = testing::test_chart();
  double gate = 0.5, h = 1.0 / (1.0 + prm.friction * gate * gate);
  double p0 = chart.power(gate, 0.95, h, true).p_m;
  VspsState s{0.95, p0, p0, gate, gate * std::sqrt(h), h};
  UnitInputs in{p0, 1.0};  // command far beyond one step of slew
  const double dt = 1e-3;
  UnitStepResult r = step_unit(s, in, 1.0, dt, prm, chart);
  CHECK(r.rate_clamped);
  CHECK(r.state.g - s.g == doctest::Approx(prm.g_rate_max * dt).epsilon(1e-12));
}

TEST_CASE("speed bound violations abort the step") {
  HillChart chart = testing::test_chart();
  double gate = 0.63, h = 1.0 / (1.0 + prm.friction * gate * gate);
  VspsState s{prm.omega_r_min - kSpeedAbortMargin + 1e-4, 0.9, 0.1, gate, gate * std::sqrt(h), h};
  UnitInputs in{0.9, gate};  // heavy electrical load, mechanical starved
  CHECK_THROWS_AS(
      [&] {
        for (int k = 0; k < 5000; ++k) s = step_unit(s, in, 1.0, 1e-3, prm, chart).state;
      }(),
      Error);
}

TEST_CASE("rotor kinetic energy balances the power mismatch integral") {
  HillChart chart = testing::test_chart();
  double gate = 0.63, h = 1.0 / (1.0 + prm.friction * gate * gate);
  double p0 = chart.power(gate, 0.95, h, true).p_m;
  VspsState s{0.95, p0, p0, gate, gate * std::sqrt(h), h};
  UnitInputs in{p0, gate + 0.2};  // open the vane while holding electrical power

  const double dt = 1e-3;
  double integral = 0.0;
  double w0 = s.omega_r;
  double prev = s.p_m - s.p_e;
  for (int k = 0; k < 5000; ++k) {
    s = step_unit(s, in, 1.0, dt, prm, chart).state;
    double cur = s.p_m - s.p_e;
    integral += 0.5 * dt * (prev + cur);
    prev = cur;
  }
  double kinetic = prm.h_inertia * (s.omega_r * s.omega_r - w0 * w0);
  CHECK(std::abs(integral - kinetic) < 1e-6);
}

TEST_CASE("penstock coupling decouples when the tunnel constant is zero") {
  auto params = std::vector<VspsUnitParams>{prm, prm};
  std::vector<VspsState> states(2);
  states[0] = {0.95, 0.6, 0.6, 0.6, 0.55, 1.0};
  states[1] = {0.95, 0.6, 0.6, 0.7, 0.80, 1.0};
  PenstockCoupling c = shared_penstock_couple(states, params, {0.0, 1.0});
  CHECK(c.boundary_head[0] == doctest::Approx(1.0));
  CHECK(c.boundary_head[1] == doctest::Approx(1.0));
  // each unit's flow derivative depends only on its own balance
  double expect0 = (1.0 - turbine_head(0.55, 0.6) - prm.friction * 0.55 * 0.55) / prm.t_w;
  CHECK(c.q_dot[0] == doctest::Approx(expect0).epsilon(1e-12));
}

TEST_CASE("symmetric units see identical boundary heads") {
  auto params = std::vector<VspsUnitParams>{prm, prm};
  std::vector<VspsState> states(2);
  states[0] = {0.95, 0.6, 0.6, 0.65, 0.60, 1.0};
  states[1] = states[0];
  PenstockCoupling c = shared_penstock_couple(states, params, {0.6, 1.0});
  CHECK(c.boundary_head[0] == doctest::Approx(c.boundary_head[1]).epsilon(1e-15));
  CHECK(c.q_dot[0] == doctest::Approx(c.q_dot[1]).epsilon(1e-15));
}

TEST_CASE("one unit opening its vane transiently drops the neighbour's boundary head") {
  HillChart chart = testing::test_chart();
  auto params = std::vector<VspsUnitParams>{prm, prm};
  double gate = 0.6, h = 1.0 / (1.0 + prm.friction * gate * gate);
  double p0 = chart.power(gate, 0.95, h, true).p_m;
  std::vector<VspsState> states(2, VspsState{0.95, p0, p0, gate, gate * std::sqrt(h), h});
  TunnelParams tunnel{0.6, 1.0};

  PenstockCoupling before = shared_penstock_couple(states, params, tunnel);
  CHECK(before.boundary_head[1] == doctest::Approx(1.0).epsilon(1e-9));

  UnitInputs open{p0, 1.0};
  UnitInputs hold{p0, gate};
  for (int k = 0; k < 800; ++k) {
    PenstockCoupling c = shared_penstock_couple(states, params, tunnel);
    states[0] = step_unit(states[0], open, c.boundary_head[0], 1e-3, params[0], chart).state;
    states[1] = step_unit(states[1], hold, c.boundary_head[1], 1e-3, params[1], chart).state;
  }
  PenstockCoupling after = shared_penstock_couple(states, params, tunnel);
  CHECK(after.boundary_head[1] < before.boundary_head[1] - 1e-6);
}

TEST_CASE("optimal speed clamps to the unit speed range") {
  HillChart chart = testing::test_chart();
  // table value at light load sits below the floor and gets clamped
  CHECK(chart.optimal_speed(0.05, 1.0) < prm.omega_r_min);
  CHECK(optimal_speed(0.05, 1.0, chart, prm) == doctest::Approx(prm.omega_r_min));
  VspsUnitParams narrow = prm;
  narrow.omega_r_max = 1.02;
  CHECK(optimal_speed(1.15, 1.0, chart, narrow, true) == doctest::Approx(narrow.omega_r_max));
  double w = optimal_speed(0.6, 1.0, chart, prm);
  CHECK(w >= prm.omega_r_min);
  CHECK(w <= prm.omega_r_max);
}
