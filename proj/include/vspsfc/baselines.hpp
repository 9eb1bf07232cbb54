#pragma once

#include <vector>

#include "vspsfc/common.hpp"
#include "vspsfc/grid.hpp"
#include "vspsfc/system_model.hpp"

namespace vspsfc {

struct FspsGovParams {
  double droop = 0.04;       // permanent droop, pu frequency per pu gate
  double temp_droop = 0.4;   // temporary droop added during transients
  double reset_time = 8.0;   // washout time of the temporary droop, s
  double t_gov = 0.2;        // pilot servo lag, s

  void validate() const;
};

/// Fixed-speed variant of the plant: the units are synchronous, so their
/// rotors follow the grid frequency and their inertia is folded into the
/// system swing. The only control path is a transient-droop governor driving
/// the guide vane (the water column makes an undamped pure-droop gate loop
/// unstable). State layout: [grid states..., (x_gov, x_td, g, q) per unit].
class FspsModel {
 public:
  FspsModel(GridParams grid, PlantConfig plant, FspsGovParams gov);

  int n_x() const;
  int idx_gov(int i) const;
  int idx_td(int i) const;
  int idx_gate(int i) const;
  int idx_flow(int i) const;
  int n_units() const { return static_cast<int>(plant_.units.size()); }

  const VectorXd& equilibrium_state() const { return x0_; }
  const GridModel& grid() const { return grid_; }
  const PlantConfig& plant() const { return plant_; }

  TruthStepResult fsps_plant_step(const VectorXd& x, double d_load, double dt) const;

  double mechanical_power(const VectorXd& x, int i) const;

  /// Electrical output reconstructed from the torque balance at the common
  /// speed: p_m minus the unit's own inertial absorption.
  double electrical_power(const VectorXd& x, int i, double d_load) const;

  double frequency_derivative(const VectorXd& x, double d_load) const;
  double external_injection(const VectorXd& x) const;

 private:
  GridModel grid_;
  PlantConfig plant_;
  FspsGovParams gov_;
  VectorXd x0_;
  std::vector<double> p_m0_, g0_;
};

struct VicConfig {
  double k_inertia = 0.0;   // pu power per pu/s frequency slope, unit base
  double k_droop = 0.0;     // pu power per pu frequency deviation, unit base
  double washout_time = 0.1;
  double gov_kp = 1.5;
  double gov_ki = 0.4;

  void validate() const;
};

/// Additional power command from the filtered frequency derivative and the
/// droop term, computed from the sampled deviation history (most recent
/// sample last). Needs at least two samples.
double vic_command(const std::vector<double>& domega_history, const VicConfig& cfg, double dt);

/// Virtual-inertia baseline controller: the power command comes from
/// vic_command, the vane from the steady-state feedforward optimizer plus a
/// PI speed governor.
class VicController {
 public:
  VicController(const SystemModel& model, VicConfig cfg, double dt_ctrl);

  VectorXd cycle(const VectorXd& y);
  const VectorXd& command() const { return u_prev_; }

 private:
  const SystemModel& model_;
  VicConfig cfg_;
  double dt_ctrl_;
  std::vector<double> history_;
  std::vector<double> speed_integral_;
  VectorXd u_prev_;
};

}  // namespace vspsfc
