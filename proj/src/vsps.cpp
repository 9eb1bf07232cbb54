#include "vspsfc/vsps.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace vspsfc {

namespace {
constexpr double kGateFloor = 1e-3;  // guards the valve characteristic near closed gate
}

void VspsUnitParams::validate() const {
  double sigma_ref = 1.0 - l_m * l_m / (l_s * l_r);
  if (std::abs(sigma - sigma_ref) > 1e-12)
    throw Error(ErrorKind::ConfigInvalid, "sigma inconsistent with 1 - l_m^2/(l_s*l_r)");
  if (!(omega_r_min > 0.0 && omega_r_min < 1.0 && omega_r_max > 1.0))
    throw Error(ErrorKind::ConfigInvalid, "rotor speed range must straddle 1 pu");
  if (!(t_p > 0.0 && t_g > 0.0 && t_w > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "unit time constants must be positive");
  if (!(s_mva > 0.0 && i_r_rated > 0.0 && i_s_rated > 0.0 && u_r_rated > 0.0 && h_inertia > 0.0 &&
        g_rate_max > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "unit ratings and inertia must be positive");
  if (!(r_r > 0.0 && l_s > 0.0 && l_r > 0.0 && l_m > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "DFIM parameters must be positive");
  if (!(friction >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "friction must be non-negative");
}

DfimCurrents dfim_algebra(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm,
                          double q_power) {
  if (!(omega_pcc > 0.0) || !(omega_r > 0.0))
    throw Error(ErrorKind::NonPhysical, "dfim_algebra requires positive frequencies");
  const double us = kStatorVoltage;
  DfimCurrents c;
  c.i_rd = p_e * prm.l_s * omega_pcc / (prm.l_m * us * omega_r);
  c.i_rq = -(q_power + us * us / (prm.l_s * omega_pcc)) * prm.l_s / (prm.l_m * us);
  c.i_sd = p_e / (us * omega_r);
  c.i_sq = q_power / us;
  double slip = omega_pcc - omega_r;
  double coupling = prm.sigma * prm.l_r * slip * c.i_rq - prm.l_m * slip * us / (prm.l_s * omega_pcc);
  c.u_r_amplitude = prm.r_ur * std::abs(coupling);
  return c;
}

double exact_rotor_current(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm) {
  DfimCurrents c = dfim_algebra(p_e, omega_pcc, omega_r, prm);
  return std::hypot(c.i_rd, c.i_rq);
}

double exact_stator_current(double p_e, double omega_r) {
  return std::abs(p_e) / (kStatorVoltage * omega_r);
}

double exact_rotor_voltage(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm) {
  DfimCurrents c = dfim_algebra(p_e, omega_pcc, omega_r, prm);
  double slip = omega_pcc - omega_r;
  double u_rd = prm.r_r * c.i_rd - prm.sigma * prm.l_r * slip * c.i_rq +
                prm.l_m * slip * kStatorVoltage / (prm.l_s * omega_pcc);
  double u_rq = prm.r_r * c.i_rq + prm.sigma * prm.l_r * slip * c.i_rd;
  return std::hypot(u_rd, u_rq);
}

double coupling_term_magnitude(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm) {
  DfimCurrents c = dfim_algebra(p_e, omega_pcc, omega_r, prm);
  double slip = omega_pcc - omega_r;
  return std::abs(prm.sigma * prm.l_r * slip * c.i_rq -
                  prm.l_m * slip * kStatorVoltage / (prm.l_s * omega_pcc));
}

double turbine_head(double q, double g) {
  double gate = std::max(g, kGateFloor);
  double ratio = q / gate;
  return ratio * ratio;
}

PenstockCoupling shared_penstock_couple(const std::vector<VspsState>& states,
                                        const std::vector<VspsUnitParams>& params, const TunnelParams& tunnel) {
  const std::size_t n = states.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(static_cast<long>(n), static_cast<long>(n), tunnel.t_wc);
  Eigen::VectorXd r(static_cast<long>(n));
  for (std::size_t i = 0; i < n; ++i) {
    m(static_cast<long>(i), static_cast<long>(i)) += params[i].t_w;
    double h_i = turbine_head(states[i].q, states[i].g);
    r(static_cast<long>(i)) = tunnel.static_head - h_i - params[i].friction * states[i].q * states[i].q;
  }
  Eigen::VectorXd q_dot = m.partialPivLu().solve(r);
  double tunnel_drop = tunnel.t_wc * q_dot.sum();

  PenstockCoupling out;
  out.q_dot.assign(n, 0.0);
  out.boundary_head.assign(n, tunnel.static_head - tunnel_drop);
  for (std::size_t i = 0; i < n; ++i) out.q_dot[i] = q_dot(static_cast<long>(i));
  return out;
}

namespace {

struct UnitDeriv {
  double omega = 0.0, p_e = 0.0, g = 0.0, q = 0.0;
};

UnitDeriv unit_rhs(double omega, double p_e, double g, double q, const UnitInputs& in, double boundary_head,
                   const VspsUnitParams& prm, const HillChart& chart, bool* rate_clamped) {
  UnitDeriv d;
  d.p_e = (in.p_star - p_e) / prm.t_p;

  double g_cmd = std::clamp(in.g_star, 0.0, 1.0);
  double g_rate = (g_cmd - g) / prm.t_g;
  if (std::abs(g_rate) > prm.g_rate_max) {
    g_rate = std::copysign(prm.g_rate_max, g_rate);
    if (rate_clamped) *rate_clamped = true;
  }
  d.g = g_rate;

  double h = turbine_head(q, g);
  d.q = (boundary_head - h - prm.friction * q * q) / prm.t_w;

  double p_m = chart.power(g, omega, h, /*clamp=*/true).p_m;
  d.omega = (p_m - p_e) / (2.0 * prm.h_inertia * omega);
  return d;
}

}  // namespace

UnitStepResult step_unit(const VspsState& state, const UnitInputs& inputs, double boundary_head, double dt,
                         const VspsUnitParams& prm, const HillChart& chart) {
  UnitStepResult out;
  bool clamped = false;
  auto rhs = [&](double w, double pe, double g, double q) {
    return unit_rhs(w, pe, g, q, inputs, boundary_head, prm, chart, &clamped);
  };

  const double w0 = state.omega_r, pe0 = state.p_e, g0 = state.g, q0 = state.q;
  UnitDeriv k1 = rhs(w0, pe0, g0, q0);
  UnitDeriv k2 = rhs(w0 + 0.5 * dt * k1.omega, pe0 + 0.5 * dt * k1.p_e, g0 + 0.5 * dt * k1.g, q0 + 0.5 * dt * k1.q);
  UnitDeriv k3 = rhs(w0 + 0.5 * dt * k2.omega, pe0 + 0.5 * dt * k2.p_e, g0 + 0.5 * dt * k2.g, q0 + 0.5 * dt * k2.q);
  UnitDeriv k4 = rhs(w0 + dt * k3.omega, pe0 + dt * k3.p_e, g0 + dt * k3.g, q0 + dt * k3.q);

  VspsState s = state;
  s.omega_r = w0 + dt / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega);
  s.p_e = pe0 + dt / 6.0 * (k1.p_e + 2.0 * k2.p_e + 2.0 * k3.p_e + k4.p_e);
  s.g = std::clamp(g0 + dt / 6.0 * (k1.g + 2.0 * k2.g + 2.0 * k3.g + k4.g), 0.0, 1.0);
  s.q = q0 + dt / 6.0 * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  s.h = turbine_head(s.q, s.g);
  s.p_m = chart.power(s.g, s.omega_r, s.h, /*clamp=*/true).p_m;

  if (s.omega_r < prm.omega_r_min - kSpeedAbortMargin || s.omega_r > prm.omega_r_max + kSpeedAbortMargin)
    throw Error(ErrorKind::SpeedBoundViolation,
                "rotor speed " + std::to_string(s.omega_r) + " outside hard abort bound");

  out.state = s;
  out.rate_clamped = clamped;
  return out;
}

double optimal_speed(double p_star, double h, const HillChart& chart, const VspsUnitParams& prm,
                     bool clamp_to_hull) {
  double w = chart.optimal_speed(p_star, h, clamp_to_hull);
  return std::clamp(w, prm.omega_r_min, prm.omega_r_max);
}

}  // namespace vspsfc
