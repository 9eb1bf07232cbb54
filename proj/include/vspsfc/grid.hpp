#pragma once

#include <vector>

#include "vspsfc/common.hpp"

namespace vspsfc {

struct SyncUnitParams {
  double s_mva = 0.0;
  double droop = 0.05;
  double t_gov = 0.2;
  double t_turb = 7.0;
  // fraction of the governor command acting without the turbine lag
  // (reheat-style shaping; keeps the aggregated governor loop stable)
  double hp_fraction = 0.3;
};

struct BatteryParams {
  double s_mva = 0.0;
  double droop = 0.02;
  double t_lag = 0.05;
};

struct GridParams {
  double h_sys = 54.39;       // s, on the system base, pumped-storage units excluded
  double d_sys = 0.2;         // pu
  double f_sys = 0.2;         // damping coefficient for the reference distribution
  double s_base_mva = 100.0;
  std::vector<SyncUnitParams> sync_units;
  BatteryParams battery;

  void validate() const;
};

struct DisturbanceEvent {
  double time = 0.0;
  double delta_p_load = 0.0;  // pu on the system base, adds to the running load step
};

struct Disturbance {
  std::vector<DisturbanceEvent> events;

  double load_at(double t) const;
  void validate() const;
};

/// Aggregated system-frequency model: equivalent-machine swing driven by
/// governor, battery and external injections against the load step and the
/// damping term. State layout: [domega_pcc, (x_gov, x_turb) per sync unit,
/// x_batt], all deviations from the pre-disturbance equilibrium. Governor and
/// battery outputs are pu on their own bases.
class GridModel {
 public:
  explicit GridModel(GridParams params, double extra_inertia = 0.0);

  int n_states() const { return 2 + 2 * static_cast<int>(params_.sync_units.size()); }
  int idx_domega() const { return 0; }
  int idx_gov(int j) const { return 1 + 2 * j; }
  int idx_turb(int j) const { return 2 + 2 * j; }
  int idx_batt() const { return 1 + 2 * static_cast<int>(params_.sync_units.size()); }

  double inertia() const { return params_.h_sys + extra_inertia_; }
  const GridParams& params() const { return params_; }

  /// Governor + battery injection, pu on the system base.
  double internal_generation(const VectorXd& x) const;

  /// p_external: net external injection deviation (e.g. the pumped-storage
  /// plant), pu on the system base, held over the step.
  VectorXd deriv(const VectorXd& x, double p_external, double d_load, bool apply_limits) const;

  VectorXd step_grid(const VectorXd& x, double p_external, double d_load, double dt,
                     bool apply_limits = true) const;

 private:
  GridParams params_;
  double extra_inertia_ = 0.0;
};

struct NadirMetrics {
  double nadir = 0.0;
  double t_nadir = 0.0;
  double rocof_max = 0.0;          // signed, max magnitude
  double settling_band_entry = 0.0;
};

/// Extremal frequency deviation with sign, its time, the extreme finite-
/// difference slope, and the first time the trace stays within 10% of |nadir|
/// of its final value. Throws EmptyTrace.
NadirMetrics nadir_metrics(const std::vector<double>& time, const std::vector<double>& domega);

}  // namespace vspsfc
