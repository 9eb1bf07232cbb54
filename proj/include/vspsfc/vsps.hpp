#pragma once

#include <vector>

#include "vspsfc/common.hpp"
#include "vspsfc/hill_chart.hpp"

namespace vspsfc {

// Stator voltage is held at nominal throughout (stiff grid connection).
inline constexpr double kStatorVoltage = 1.0;

// Hard simulation-abort margin beyond the configured rotor speed range.
inline constexpr double kSpeedAbortMargin = 0.05;

struct VspsUnitParams {
  double s_mva = 250.0;  // unit rating, MVA

  // DFIM electrical parameters, pu on the unit base
  double r_r = 0.001;
  double l_s = 3.605;
  double l_r = 3.605;
  double l_m = 3.5;
  double sigma = 0.057404090866245649;  // 1 - l_m^2/(l_s*l_r), revalidated on load

  double i_r_rated = 1.2;
  double i_s_rated = 1.1;
  double u_r_rated = 0.30;
  double r_ur = 1.0526315789473684;  // rotor-voltage amplitude correction factor

  double h_inertia = 4.0;  // s
  double omega_r_min = 0.90;
  double omega_r_max = 1.10;

  double t_p = 0.1;        // electrical-power tracking lag, s
  double t_g = 0.5;        // guide-vane servo lag, s
  double g_rate_max = 0.1;  // pu/s
  double t_w = 1.5;        // unit penstock water time constant, s
  double friction = 0.05;  // penstock loss coefficient on q^2

  double rotor_time_constant() const { return sigma * l_r / r_r; }

  void validate() const;
};

struct VspsState {
  double omega_r = 1.0;
  double p_e = 0.0;
  double p_m = 0.0;
  double g = 0.0;
  double q = 0.0;
  double h = 1.0;
};

struct DfimCurrents {
  double i_rd = 0.0;
  double i_rq = 0.0;
  double i_sd = 0.0;
  double i_sq = 0.0;
  double u_r_amplitude = 0.0;  // r_ur * |d-axis coupling term|
};

/// Algebraic DFIM quantities at an operating point: rotor currents from the
/// power balance (reactive power = 0 unless given), stator currents from the
/// power/speed ratio, and the corrected rotor-voltage amplitude from the
/// slip-proportional coupling term.
DfimCurrents dfim_algebra(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm,
                          double q_power = 0.0);

inline DfimCurrents dfim_algebra(const VspsState& st, double omega_pcc, const VspsUnitParams& prm) {
  return dfim_algebra(st.p_e, omega_pcc, st.omega_r, prm);
}

/// Rotor current amplitude sqrt(i_rd^2 + i_rq^2).
double exact_rotor_current(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm);

/// Stator current amplitude |p_e| / (U_s * omega_r).
double exact_stator_current(double p_e, double omega_r);

/// Steady-state rotor voltage amplitude including the resistive and leakage
/// terms (the reference the corrected coupling-term amplitude is checked
/// against).
double exact_rotor_voltage(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm);

/// |coupling term| alone, without the r_ur correction.
double coupling_term_magnitude(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm);

struct TunnelParams {
  double t_wc = 0.0;        // common-tunnel water time constant, s
  double static_head = 1.0;  // reservoir head, pu
};

/// Flow derivatives of n units sharing a tunnel: (diag(T_w) + T_wc*11')*dq = r
/// with r_i the unit head balance. Boundary head is the static head minus the
/// common-tunnel inertia drop; with T_wc = 0 the units decouple.
struct PenstockCoupling {
  std::vector<double> q_dot;
  std::vector<double> boundary_head;
};
PenstockCoupling shared_penstock_couple(const std::vector<VspsState>& states,
                                        const std::vector<VspsUnitParams>& params, const TunnelParams& tunnel);

struct UnitInputs {
  double p_star = 0.0;
  double g_star = 0.0;
};

struct UnitStepResult {
  VspsState state;
  bool rate_clamped = false;
};

/// One fixed-step RK4 advance of a single unit with the penstock boundary head
/// frozen over the step. The servo is rate- and position-limited; electrical
/// power follows a first-order lag; the swing uses the per-unit torque
/// balance. Throws SpeedBoundViolation past the hard abort bound.
UnitStepResult step_unit(const VspsState& state, const UnitInputs& inputs, double boundary_head, double dt,
                         const VspsUnitParams& prm, const HillChart& chart);

/// Head at the turbine from the gate/flow valve characteristic.
double turbine_head(double q, double g);

/// Optimal-speed reference from the chart, clamped to the unit speed range.
double optimal_speed(double p_star, double h, const HillChart& chart, const VspsUnitParams& prm,
                     bool clamp_to_hull = false);

}  // namespace vspsfc
