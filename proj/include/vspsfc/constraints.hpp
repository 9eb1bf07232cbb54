#pragma once

#include <string>
#include <vector>

#include "vspsfc/common.hpp"
#include "vspsfc/linearize.hpp"
#include "vspsfc/vsps.hpp"

namespace vspsfc {

enum class ConstraintLabel {
  RotorCurrent,
  StatorCurrent,
  RotorVoltageSs,
  RotorVoltageDyn,
  SpeedBound,
  VaneBox,
  VaneRate,
};

const char* to_string(ConstraintLabel label);

/// One linear inequality over the predicted trajectory: state coefficients
/// apply to state increments (relative to the operating point) at prediction
/// step `step`; input coefficients are indexed flat over the stacked command
/// increments (step * n_u + input).
struct ConstraintRow {
  ConstraintLabel label = ConstraintLabel::RotorCurrent;
  int unit = -1;
  int step = 0;
  std::vector<std::pair<int, double>> state_coeffs;
  std::vector<std::pair<int, double>> input_coeffs;
  double rhs = 0.0;
  bool soft = false;
};

struct ConstraintSet {
  std::vector<ConstraintRow> rows;
  int horizon = 0;
  int control_horizon = 0;
};

/// Linearized rotor-current limit at op, expressed in increments of
/// (P_e, omega_PCC, omega_r). Falls back to a numeric-gradient row of the
/// exact current amplitude when the operating point is close to zero power
/// or zero excitation.
ConstraintRow rotor_current_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                int unit, int step);

/// Stator-current limit in its exactly linear cleared form.
ConstraintRow stator_current_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                 int unit, int step);

/// Steady-state rotor-voltage limit (sub-synchronous branch of the
/// corrected coupling-term bound, cleared of its positive denominator).
ConstraintRow rotor_voltage_ss_row(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx,
                                   int unit, int step);

/// Mirrored branch for super-synchronous slip; together with
/// rotor_voltage_ss_row this encodes the absolute value exactly.
ConstraintRow rotor_voltage_ss_row_mirror(const OperatingPoint& op, const VspsUnitParams& prm,
                                          const StateIndex& idx, int unit, int step);

/// Gain limiting the per-cycle power-command increment so the transient
/// rotor-voltage excursion stays within rating.
double dyn_voltage_gain(const OperatingPoint& op, const VspsUnitParams& prm, const StateIndex& idx, int unit,
                        bool printed_form);

/// Both signs of the dynamic rotor-voltage bound on the command increment at
/// command step k.
std::vector<ConstraintRow> rotor_voltage_dyn_rows(const OperatingPoint& op, const VspsUnitParams& prm,
                                                  const StateIndex& idx, int unit, int k, bool printed_form);

/// Speed box over the prediction horizon (soft) plus vane position and rate
/// boxes over the control horizon (hard).
std::vector<ConstraintRow> actuator_rows(const OperatingPoint& op, const VspsUnitParams& prm,
                                         const StateIndex& idx, int unit, int horizon, int control_horizon,
                                         double dt_pred);

/// Full stacked set for all units: equivalent rows per prediction step, the
/// dynamic voltage rows per command step, and the actuator boxes.
ConstraintSet build_constraint_set(const OperatingPoint& op, const std::vector<VspsUnitParams>& units,
                                   const StateIndex& idx, int horizon, int control_horizon, double dt_pred,
                                   bool printed_dyn_gain = false);

/// Exact nonlinear limit quantities at an operating point (test oracles and
/// trace columns).
struct ExactLimits {
  double i_r = 0.0;
  double i_s = 0.0;
  double u_r = 0.0;           // full steady-state amplitude
  double u_r_coupling = 0.0;  // corrected coupling-term amplitude
};
ExactLimits exact_limits(double p_e, double omega_pcc, double omega_r, const VspsUnitParams& prm);

/// Cleared-form limit functions whose gradients the linear rows reproduce.
double stator_limit_function(double p_e, double omega_r, const VspsUnitParams& prm);
double rotor_voltage_limit_function(double omega_pcc, double omega_r, const VspsUnitParams& prm);

}  // namespace vspsfc
