#include "vspsfc/system_model.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace vspsfc {

namespace {
constexpr double kGateFloor = 1e-3;

double head_of(double q, double g) { return turbine_head(q, g); }
}  // namespace

SystemModel::SystemModel(GridParams grid, PlantConfig plant)
    : grid_(std::move(grid)), plant_(std::move(plant)) {
  idx_.n_sync = static_cast<int>(grid_.params().sync_units.size());
  idx_.n_units = static_cast<int>(plant_.units.size());
  if (plant_.p_set.size() != plant_.units.size())
    throw Error(ErrorKind::ConfigInvalid, "dispatch list must match unit count");
  for (const auto& u : plant_.units) u.validate();
  plant_.chart.validate();
  solve_equilibrium();
}

void SystemModel::solve_equilibrium() {
  const double h_s = plant_.tunnel.static_head;
  x0_ = VectorXd::Zero(idx_.n_x());
  u0_ = VectorXd::Zero(idx_.n_u());

  for (int i = 0; i < idx_.n_units; ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    const double p_set = plant_.p_set[static_cast<std::size_t>(i)];

    // Steady state has no tunnel drop; each unit solves h = h_s/(1 + f*g^2)
    // with gate from the power balance, and the dispatch speed comes from the
    // optimal-speed table at the resulting head.
    double omega = 1.0;
    double gate = 0.5, head = h_s;
    for (int pass = 0; pass < 200; ++pass) {
      double lo = plant_.chart.gate_axis().front(), hi = plant_.chart.gate_axis().back();
      for (int it = 0; it < 100; ++it) {
        double mid = 0.5 * (lo + hi);
        double h_mid = h_s / (1.0 + prm.friction * mid * mid);
        double p_mid = plant_.chart.power(mid, omega, h_mid, true).p_m;
        if (p_mid < p_set)
          lo = mid;
        else
          hi = mid;
      }
      gate = 0.5 * (lo + hi);
      head = h_s / (1.0 + prm.friction * gate * gate);
      double omega_new = optimal_speed(p_set, head, plant_.chart, prm, true);
      if (std::abs(omega_new - omega) < 1e-14) {
        omega = omega_new;
        break;
      }
      omega = omega_new;
    }
    // Re-solve gate once more at the converged speed.
    double lo = plant_.chart.gate_axis().front(), hi = plant_.chart.gate_axis().back();
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      double h_mid = h_s / (1.0 + prm.friction * mid * mid);
      if (plant_.chart.power(mid, omega, h_mid, true).p_m < p_set)
        lo = mid;
      else
        hi = mid;
    }
    gate = 0.5 * (lo + hi);
    head = h_s / (1.0 + prm.friction * gate * gate);

    x0_(idx_.unit_omega(i)) = omega;
    x0_(idx_.unit_pe(i)) = p_set;
    x0_(idx_.unit_gate(i)) = gate;
    x0_(idx_.unit_flow(i)) = gate * std::sqrt(head);
    u0_(idx_.iu_p(i)) = p_set;
    u0_(idx_.iu_g(i)) = gate;
  }
}

VspsState SystemModel::unit_state(const VectorXd& x, int i) const {
  VspsState s;
  s.omega_r = x(idx_.unit_omega(i));
  s.p_e = x(idx_.unit_pe(i));
  s.g = x(idx_.unit_gate(i));
  s.q = x(idx_.unit_flow(i));
  s.h = head_of(s.q, s.g);
  s.p_m = plant_.chart.power(s.g, s.omega_r, s.h, true).p_m;
  return s;
}

double SystemModel::external_injection(const VectorXd& x) const {
  double p = 0.0;
  for (int i = 0; i < idx_.n_units; ++i)
    p += (x(idx_.unit_pe(i)) - pe_base(i)) * unit_base_ratio(i);
  return p;
}

VectorXd SystemModel::deriv(const VectorXd& x, const VectorXd& u, double d_load) const {
  if (x.size() != idx_.n_x() || u.size() != idx_.n_u())
    throw Error(ErrorKind::DimensionMismatch, "system deriv dimension mismatch");

  VectorXd dx = VectorXd::Zero(idx_.n_x());

  std::vector<VspsState> states(static_cast<std::size_t>(idx_.n_units));
  for (int i = 0; i < idx_.n_units; ++i) {
    auto& s = states[static_cast<std::size_t>(i)];
    s.omega_r = x(idx_.unit_omega(i));
    s.p_e = x(idx_.unit_pe(i));
    s.g = x(idx_.unit_gate(i));
    s.q = x(idx_.unit_flow(i));
  }
  PenstockCoupling coupling = shared_penstock_couple(states, plant_.units, plant_.tunnel);

  for (int i = 0; i < idx_.n_units; ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    const auto& s = states[static_cast<std::size_t>(i)];
    double h = head_of(s.q, s.g);
    double p_m = plant_.chart.power(s.g, s.omega_r, h, false).p_m;

    dx(idx_.unit_pe(i)) = (u(idx_.iu_p(i)) - s.p_e) / prm.t_p;
    dx(idx_.unit_gate(i)) = (u(idx_.iu_g(i)) - s.g) / prm.t_g;
    dx(idx_.unit_flow(i)) = coupling.q_dot[static_cast<std::size_t>(i)];
    dx(idx_.unit_omega(i)) = (p_m - s.p_e) / (2.0 * prm.h_inertia * s.omega_r);
  }

  VectorXd grid_part = x.head(grid_.n_states());
  VectorXd grid_dx = grid_.deriv(grid_part, external_injection(x), d_load, /*apply_limits=*/false);
  dx.head(grid_.n_states()) = grid_dx;
  return dx;
}

ContinuousJacobians SystemModel::jacobians(const VectorXd& x, const VectorXd& u, double d_load) const {
  const int nx = idx_.n_x();
  const int nu = idx_.n_u();
  ContinuousJacobians jc;
  jc.a = MatrixXd::Zero(nx, nx);
  jc.b = MatrixXd::Zero(nx, nu);
  jc.e = MatrixXd::Zero(nx, 1);
  jc.f = deriv(x, u, d_load);

  const auto& gp = grid_.params();
  const double two_h = 2.0 * grid_.inertia();
  const int iw = idx_.domega();

  // grid swing row
  jc.a(iw, iw) = -gp.d_sys / two_h;
  for (int j = 0; j < idx_.n_sync; ++j) {
    const auto& su = gp.sync_units[static_cast<std::size_t>(j)];
    jc.a(iw, idx_.gov(j)) = su.hp_fraction * su.s_mva / gp.s_base_mva / two_h;
    jc.a(iw, idx_.turb(j)) = (1.0 - su.hp_fraction) * su.s_mva / gp.s_base_mva / two_h;
  }
  if (gp.battery.s_mva > 0.0) jc.a(iw, idx_.batt()) = gp.battery.s_mva / gp.s_base_mva / two_h;
  for (int i = 0; i < idx_.n_units; ++i) jc.a(iw, idx_.unit_pe(i)) = unit_base_ratio(i) / two_h;
  jc.e(iw, 0) = -1.0 / two_h;

  for (int j = 0; j < idx_.n_sync; ++j) {
    const auto& su = gp.sync_units[static_cast<std::size_t>(j)];
    jc.a(idx_.gov(j), iw) = -1.0 / (su.droop * su.t_gov);
    jc.a(idx_.gov(j), idx_.gov(j)) = -1.0 / su.t_gov;
    jc.a(idx_.turb(j), idx_.gov(j)) = 1.0 / su.t_turb;
    jc.a(idx_.turb(j), idx_.turb(j)) = -1.0 / su.t_turb;
  }
  if (gp.battery.s_mva > 0.0) {
    jc.a(idx_.batt(), iw) = -1.0 / (gp.battery.droop * gp.battery.t_lag);
    jc.a(idx_.batt(), idx_.batt()) = -1.0 / gp.battery.t_lag;
  }

  // penstock coupling matrix, shared by all flow rows
  const int n = idx_.n_units;
  MatrixXd m = MatrixXd::Constant(n, n, plant_.tunnel.t_wc);
  for (int i = 0; i < n; ++i) m(i, i) += plant_.units[static_cast<std::size_t>(i)].t_w;
  Eigen::PartialPivLU<MatrixXd> m_lu(m);

  MatrixXd dr_dq = MatrixXd::Zero(n, n);
  MatrixXd dr_dg = MatrixXd::Zero(n, n);

  for (int i = 0; i < n; ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    double omega = x(idx_.unit_omega(i));
    double pe = x(idx_.unit_pe(i));
    double g = x(idx_.unit_gate(i));
    double q = x(idx_.unit_flow(i));
    double gate = std::max(g, kGateFloor);
    double h = head_of(q, g);
    double dh_dq = 2.0 * q / (gate * gate);
    double dh_dg = g > kGateFloor ? -2.0 * q * q / (gate * gate * gate) : 0.0;

    auto pm = plant_.chart.power(g, omega, h, false);

    jc.a(idx_.unit_pe(i), idx_.unit_pe(i)) = -1.0 / prm.t_p;
    jc.b(idx_.unit_pe(i), idx_.iu_p(i)) = 1.0 / prm.t_p;
    jc.a(idx_.unit_gate(i), idx_.unit_gate(i)) = -1.0 / prm.t_g;
    jc.b(idx_.unit_gate(i), idx_.iu_g(i)) = 1.0 / prm.t_g;

    double denom = 2.0 * prm.h_inertia * omega;
    int io = idx_.unit_omega(i);
    jc.a(io, io) = pm.dp_dspeed / denom - (pm.p_m - pe) / (denom * omega);
    jc.a(io, idx_.unit_pe(i)) = -1.0 / denom;
    jc.a(io, idx_.unit_gate(i)) = (pm.dp_dgate + pm.dp_dhead * dh_dg) / denom;
    jc.a(io, idx_.unit_flow(i)) = pm.dp_dhead * dh_dq / denom;

    dr_dq(i, i) = -dh_dq - 2.0 * prm.friction * q;
    dr_dg(i, i) = -dh_dg;
  }

  MatrixXd dqdot_dq = m_lu.solve(dr_dq);
  MatrixXd dqdot_dg = m_lu.solve(dr_dg);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      jc.a(idx_.unit_flow(i), idx_.unit_flow(j)) = dqdot_dq(i, j);
      jc.a(idx_.unit_flow(i), idx_.unit_gate(j)) = dqdot_dg(i, j);
    }
  }
  return jc;
}

TruthStepResult SystemModel::truth_step(const VectorXd& x, const VectorXd& u, double d_load, double dt) const {
  if (x.size() != idx_.n_x() || u.size() != idx_.n_u())
    throw Error(ErrorKind::DimensionMismatch, "truth_step dimension mismatch");

  std::vector<VspsState> states(static_cast<std::size_t>(idx_.n_units));
  for (int i = 0; i < idx_.n_units; ++i) states[static_cast<std::size_t>(i)] = unit_state(x, i);
  PenstockCoupling coupling = shared_penstock_couple(states, plant_.units, plant_.tunnel);
  double p_ext = external_injection(x);

  TruthStepResult out;
  out.x = x;
  for (int i = 0; i < idx_.n_units; ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    UnitInputs in{u(idx_.iu_p(i)), u(idx_.iu_g(i))};
    UnitStepResult res = step_unit(states[static_cast<std::size_t>(i)], in,
                                   coupling.boundary_head[static_cast<std::size_t>(i)], dt, prm, plant_.chart);
    out.rate_clamped = out.rate_clamped || res.rate_clamped;
    out.x(idx_.unit_omega(i)) = res.state.omega_r;
    out.x(idx_.unit_pe(i)) = res.state.p_e;
    out.x(idx_.unit_gate(i)) = res.state.g;
    out.x(idx_.unit_flow(i)) = res.state.q;
  }

  VectorXd grid_part = x.head(grid_.n_states());
  out.x.head(grid_.n_states()) = grid_.step_grid(grid_part, p_ext, d_load, dt, /*apply_limits=*/true);
  return out;
}

double SystemModel::frequency_derivative(const VectorXd& x, double d_load) const {
  VectorXd grid_part = x.head(grid_.n_states());
  VectorXd dx = grid_.deriv(grid_part, external_injection(x), d_load, /*apply_limits=*/true);
  return dx(idx_.domega());
}

MatrixXd SystemModel::measurement_matrix() const {
  MatrixXd c = MatrixXd::Zero(idx_.n_y(), idx_.n_x());
  c(0, idx_.domega()) = 1.0;
  for (int i = 0; i < idx_.n_units; ++i) {
    c(1 + 3 * i, idx_.unit_omega(i)) = 1.0;
    c(2 + 3 * i, idx_.unit_pe(i)) = 1.0;
    c(3 + 3 * i, idx_.unit_gate(i)) = 1.0;
  }
  return c;
}

VectorXd SystemModel::measure(const VectorXd& x) const {
  VectorXd y(idx_.n_y());
  y(0) = x(idx_.domega());
  for (int i = 0; i < idx_.n_units; ++i) {
    y(1 + 3 * i) = x(idx_.unit_omega(i));
    y(2 + 3 * i) = x(idx_.unit_pe(i));
    y(3 + 3 * i) = x(idx_.unit_gate(i));
  }
  return y;
}

}  // namespace vspsfc
