#pragma once

#include <vector>

#include "vspsfc/common.hpp"
#include "vspsfc/grid.hpp"
#include "vspsfc/hill_chart.hpp"
#include "vspsfc/vsps.hpp"

namespace vspsfc {

struct PlantConfig {
  std::vector<VspsUnitParams> units;
  TunnelParams tunnel;
  HillChart chart;
  std::vector<double> p_set;  // dispatch per unit, pu on the unit base
};

/// State layout shared by the truth simulator, the linearizer and the
/// estimator: [domega_pcc, (x_gov, x_turb) per sync unit, x_batt,
/// (omega_r, p_e, g, q) per VSPS unit]. Inputs are (p_star, g_star) per unit.
struct StateIndex {
  int n_sync = 0;
  int n_units = 0;

  int domega() const { return 0; }
  int gov(int j) const { return 1 + 2 * j; }
  int turb(int j) const { return 2 + 2 * j; }
  int batt() const { return 1 + 2 * n_sync; }
  int unit_omega(int i) const { return 2 + 2 * n_sync + 4 * i; }
  int unit_pe(int i) const { return 3 + 2 * n_sync + 4 * i; }
  int unit_gate(int i) const { return 4 + 2 * n_sync + 4 * i; }
  int unit_flow(int i) const { return 5 + 2 * n_sync + 4 * i; }
  int n_x() const { return 2 + 2 * n_sync + 4 * n_units; }

  int iu_p(int i) const { return 2 * i; }
  int iu_g(int i) const { return 2 * i + 1; }
  int n_u() const { return 2 * n_units; }

  // measurement: domega plus (omega_r, p_e, g) per unit
  int n_y() const { return 1 + 3 * n_units; }
};

struct ContinuousJacobians {
  MatrixXd a;   // n_x x n_x
  MatrixXd b;   // n_x x n_u
  MatrixXd e;   // n_x x 1 (load disturbance)
  VectorXd f;   // rhs value at the expansion point
};

struct TruthStepResult {
  VectorXd x;
  bool rate_clamped = false;
};

/// Grid plus n VSPS units. One instance is single-threaded; instances are
/// value types and can be copied for concurrent evaluation.
class SystemModel {
 public:
  SystemModel(GridParams grid, PlantConfig plant);

  const StateIndex& idx() const { return idx_; }
  const GridModel& grid() const { return grid_; }
  const PlantConfig& plant() const { return plant_; }
  int n_units() const { return idx_.n_units; }

  const VectorXd& equilibrium_state() const { return x0_; }
  const VectorXd& equilibrium_input() const { return u0_; }
  double pe_base(int i) const { return plant_.p_set[static_cast<std::size_t>(i)]; }
  double unit_base_ratio(int i) const {
    return plant_.units[static_cast<std::size_t>(i)].s_mva / grid_.params().s_base_mva;
  }

  VspsState unit_state(const VectorXd& x, int i) const;

  /// VSPS plant injection deviation, pu on the system base.
  double external_injection(const VectorXd& x) const;

  /// Smooth right-hand side of the coupled model (no actuator clamps); used
  /// for linearization and its finite-difference oracle. Chart queries are
  /// strict and throw OutOfChart outside the hull.
  VectorXd deriv(const VectorXd& x, const VectorXd& u, double d_load) const;

  /// Analytic Jacobians of deriv() at (x, u, d).
  ContinuousJacobians jacobians(const VectorXd& x, const VectorXd& u, double d_load) const;

  /// Truth advance: penstock coupling and grid injections frozen over the
  /// step, units advanced by step_unit (with servo limits), grid by
  /// step_grid (with governor/battery limits).
  TruthStepResult truth_step(const VectorXd& x, const VectorXd& u, double d_load, double dt) const;

  /// Instantaneous frequency derivative from recorded quantities.
  double frequency_derivative(const VectorXd& x, double d_load) const;

  MatrixXd measurement_matrix() const;
  VectorXd measure(const VectorXd& x) const;

 private:
  GridModel grid_;
  PlantConfig plant_;
  StateIndex idx_;
  VectorXd x0_, u0_;

  void solve_equilibrium();
};

}  // namespace vspsfc
