#include "vspsfc/constraints.hpp"

#include <algorithm>
#include <cmath>

namespace vspsfc {

namespace {
constexpr double kDegeneratePower = 1e-6;
constexpr double kDegenerateCurrent = 1e-9;
constexpr double kFdStep = 1e-6;
}  // namespace

const char* to_string(ConstraintLabel label) {
  switch (label) {
    case ConstraintLabel::RotorCurrent: return "rotor_current";
    case ConstraintLabel::StatorCurrent: return "stator_current";
    case ConstraintLabel::RotorVoltageSs: return "rotor_voltage_ss";
    case ConstraintLabel::RotorVoltageDyn: return "rotor_voltage_dyn";
    case ConstraintLabel::SpeedBound: return "speed_bound";
    case ConstraintLabel::VaneBox: return "vane_box";
    case ConstraintLabel::VaneRate: return "vane_rate";
  }
  return "unknown";
}

ExactLimits exact_limits(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm) {
  ExactLimits lim;
  lim.i_r = exact_rotor_current(p_e, omega_pcc, omega_r, prm);
  lim.i_s = exact_stator_current(p_e, omega_r);
  lim.u_r = exact_rotor_voltage(p_e, omega_pcc, omega_r, prm);
  lim.u_r_coupling = prm.r_ur * coupling_term_magnitude(p_e, omega_pcc, omega_r, prm);
  return lim;
}

double stator_limit_function(double p_e, double omega_r, const VspsUnitParams& prm) {
  return p_e - prm.i_s_rated * kStatorVoltage * omega_r;
}

double rotor_voltage_limit_function(double omega_pcc, double omega_r, const VspsUnitParams& prm) {
  return prm.r_ur * prm.l_r * kStatorVoltage * (omega_pcc - omega_r) - prm.u_r_rated * prm.l_m * omega_pcc;
}

ConstraintRow rotor_current_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                int unit, int step) {
  const double us = kStatorVoltage;
  const double p_eo = op.x(idx.unit_pe(unit));
  const double w_pcc = 1.0 + op.x(idx.domega());
  const double w_r = op.x(idx.unit_omega(unit));
  const double i_ro = exact_rotor_current(p_eo, w_pcc, w_r, prm);

  ConstraintRow row;
  row.label = ConstraintLabel::RotorCurrent;
  row.unit = unit;
  row.step = step;
  row.soft = true;
  row.rhs = prm.i_r_rated - i_ro;

  if (std::abs(p_eo) < kDegeneratePower || i_ro < kDegenerateCurrent) {
    // formula coefficients divide by P_eo and I_ro; use central differences
    // of the exact amplitude instead
    auto ir = [&](double pe, double wp, double wr) { return exact_rotor_current(pe, wp, wr, prm); };
    double c_pe = (ir(p_eo + kFdStep, w_pcc, w_r) - ir(p_eo - kFdStep, w_pcc, w_r)) / (2.0 * kFdStep);
    double c_wp = (ir(p_eo, w_pcc + kFdStep, w_r) - ir(p_eo, w_pcc - kFdStep, w_r)) / (2.0 * kFdStep);
    double c_wr = (ir(p_eo, w_pcc, w_r + kFdStep) - ir(p_eo, w_pcc, w_r - kFdStep)) / (2.0 * kFdStep);
    row.state_coeffs = {{idx.unit_pe(unit), c_pe}, {idx.domega(), c_wp}, {idx.unit_omega(unit), c_wr}};
    return row;
  }

  double k_ir = prm.l_s * prm.l_s * w_pcc * w_pcc * p_eo * p_eo /
                (prm.l_m * prm.l_m * w_r * w_r * us * us * i_ro);
  double c_pe = k_ir / p_eo;
  double c_wp = -us * us / (i_ro * w_pcc * w_pcc * w_pcc * prm.l_m * prm.l_m) + k_ir / w_pcc;
  double c_wr = -k_ir / w_r;
  row.state_coeffs = {{idx.unit_pe(unit), c_pe}, {idx.domega(), c_wp}, {idx.unit_omega(unit), c_wr}};
  return row;
}

ConstraintRow stator_current_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                 int unit, int step) {
  const double us = kStatorVoltage;
  const double p_eo = op.x(idx.unit_pe(unit));
  const double w_r = op.x(idx.unit_omega(unit));

  ConstraintRow row;
  row.label = ConstraintLabel::StatorCurrent;
  row.unit = unit;
  row.step = step;
  row.soft = true;
  row.state_coeffs = {{idx.unit_pe(unit), 1.0}, {idx.unit_omega(unit), -prm.i_s_rated * us}};
  row.rhs = -p_eo + prm.i_s_rated * us * w_r;
  return row;
}

ConstraintRow rotor_voltage_ss_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                   int unit, int step) {
  const double us = kStatorVoltage;
  const double w_pcc = 1.0 + op.x(idx.domega());
  const double w_r = op.x(idx.unit_omega(unit));
  const double a = prm.r_ur * prm.l_r * us - prm.u_r_rated * prm.l_m;
  const double b = prm.r_ur * prm.l_r * us;

  ConstraintRow row;
  row.label = ConstraintLabel::RotorVoltageSs;
  row.unit = unit;
  row.step = step;
  row.soft = true;
  row.state_coeffs = {{idx.domega(), a}, {idx.unit_omega(unit), -b}};
  row.rhs = -a * w_pcc + b * w_r;
  return row;
}

ConstraintRow rotor_voltage_ss_row_mirror(const OperatingPoint& op, const VspsUnitParams& prm,
                                          const StateIndex& idx, int unit, int step) {
  const double us = kStatorVoltage;
  const double w_pcc = 1.0 + op.x(idx.domega());
  const double w_r = op.x(idx.unit_omega(unit));
  const double a = prm.r_ur * prm.l_r * us + prm.u_r_rated * prm.l_m;
  const double b = prm.r_ur * prm.l_r * us;

  ConstraintRow row;
  row.label = ConstraintLabel::RotorVoltageSs;
  row.unit = unit;
  row.step = step;
  row.soft = true;
  row.state_coeffs = {{idx.domega(), -a}, {idx.unit_omega(unit), b}};
  row.rhs = a * w_pcc - b * w_r;
  return row;
}

double dyn_voltage_gain(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx, int unit,
                        bool printed_form) {
  const double us = kStatorVoltage;
  const double w_pcc = 1.0 + op.x(idx.domega());
  const double w_r = op.x(idx.unit_omega(unit));
  const double k_ur2p = us * prm.l_m * w_r / (prm.r_r * prm.l_s * w_pcc);
  const double t_r = prm.rotor_time_constant();
  const double factor = std::max(t_r / prm.t_p, 1.0);
  return printed_form ? k_ur2p * factor : factor / k_ur2p;
}

std::vector<ConstraintRow> rotor_voltage_dyn_rows(const OperatingPoint& op, const VspsUnitParams& prm,
                                                  const StateIndex& idx, int unit, int k, bool printed_form) {
  const double w_pcc = 1.0 + op.x(idx.domega());
  const double p_eo = op.x(idx.unit_pe(unit));
  const double w_r = op.x(idx.unit_omega(unit));
  const double gain = dyn_voltage_gain(op, prm, idx, unit, printed_form);
  const double headroom = prm.u_r_rated - dfim_algebra(p_eo, w_pcc, w_r, prm).u_r_amplitude;

  std::vector<ConstraintRow> rows;
  for (double sign : {1.0, -1.0}) {
    ConstraintRow row;
    row.label = ConstraintLabel::RotorVoltageDyn;
    row.unit = unit;
    row.step = k;
    row.soft = true;
    row.rhs = headroom;
    row.input_coeffs.push_back({k * idx.n_u() + idx.iu_p(unit), sign * gain});
    if (k > 0) row.input_coeffs.push_back({(k - 1) * idx.n_u() + idx.iu_p(unit), -sign * gain});
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ConstraintRow> actuator_rows(const OperatingPoint& op, const VspsUnitParams& prm,
                                         const StateIndex& idx, int unit, int horizon, int control_horizon,
                                         double dt_pred) {
  if (horizon < 1) throw Error(ErrorKind::DimensionMismatch, "actuator_rows needs horizon >= 1");
  std::vector<ConstraintRow> rows;
  const double w_ro = op.x(idx.unit_omega(unit));
  const double g_cmd_o = op.u(idx.iu_g(unit));

  for (int m = 1; m <= horizon; ++m) {
    ConstraintRow hi;
    hi.label = ConstraintLabel::SpeedBound;
    hi.unit = unit;
    hi.step = m;
    hi.soft = true;
    hi.state_coeffs = {{idx.unit_omega(unit), 1.0}};
    hi.rhs = prm.omega_r_max - w_ro;
    rows.push_back(hi);

    ConstraintRow lo = hi;
    lo.state_coeffs = {{idx.unit_omega(unit), -1.0}};
    lo.rhs = w_ro - prm.omega_r_min;
    rows.push_back(lo);
  }

  for (int k = 0; k < control_horizon; ++k) {
    ConstraintRow hi;
    hi.label = ConstraintLabel::VaneBox;
    hi.unit = unit;
    hi.step = k;
    hi.input_coeffs = {{k * idx.n_u() + idx.iu_g(unit), 1.0}};
    hi.rhs = 1.0 - g_cmd_o;
    rows.push_back(hi);

    ConstraintRow lo = hi;
    lo.input_coeffs = {{k * idx.n_u() + idx.iu_g(unit), -1.0}};
    lo.rhs = g_cmd_o;
    rows.push_back(lo);

    for (double sign : {1.0, -1.0}) {
      ConstraintRow rate;
      rate.label = ConstraintLabel::VaneRate;
      rate.unit = unit;
      rate.step = k;
      rate.rhs = prm.g_rate_max * dt_pred;
      rate.input_coeffs.push_back({k * idx.n_u() + idx.iu_g(unit), sign});
      if (k > 0) rate.input_coeffs.push_back({(k - 1) * idx.n_u() + idx.iu_g(unit), -sign});
      rows.push_back(rate);
    }
  }
  return rows;
}

ConstraintSet build_constraint_set(const OperatingPoint& op, const std::vector<VspsUnitParams>& units,
                                   const StateIndex& idx, int horizon, int control_horizon, double dt_pred,
                                   bool printed_dyn_gain) {
  ConstraintSet cs;
  cs.horizon = horizon;
  cs.control_horizon = control_horizon;
  for (int i = 0; i < static_cast<int>(units.size()); ++i) {
    const auto& prm = units[static_cast<std::size_t>(i)];
    for (int m = 1; m <= horizon; ++m) {
      cs.rows.push_back(rotor_current_row(op, prm, idx, i, m));
      cs.rows.push_back(stator_current_row(op, prm, idx, i, m));
      cs.rows.push_back(rotor_voltage_ss_row(op, prm, idx, i, m));
      cs.rows.push_back(rotor_voltage_ss_row_mirror(op, prm, idx, i, m));
    }
    for (int k = 0; k < control_horizon; ++k) {
      auto dyn = rotor_voltage_dyn_rows(op, prm, idx, i, k, printed_dyn_gain);
      cs.rows.insert(cs.rows.end(), dyn.begin(), dyn.end());
    }
    auto act = actuator_rows(op, prm, idx, i, horizon, control_horizon, dt_pred);
    cs.rows.insert(cs.rows.end(), act.begin(), act.end());
  }
  return cs;
}

}  // namespace vspsfc
