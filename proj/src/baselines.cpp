#include "vspsfc/baselines.hpp"

#include <algorithm>
#include <cmath>

namespace vspsfc {

void FspsGovParams::validate() const {
  if (!(droop > 0.0 && t_gov > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "fsps governor needs positive droop and lag");
  if (!(temp_droop >= 0.0 && reset_time > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "fsps transient droop needs non-negative gain and positive reset");
}

namespace {

double fsps_extra_inertia(const GridParams& grid, const PlantConfig& plant) {
  double h = 0.0;
  for (const auto& u : plant.units) h += u.h_inertia * u.s_mva / grid.s_base_mva;
  return h;
}

}  // namespace

FspsModel::FspsModel(GridParams grid, PlantConfig plant, FspsGovParams gov)
    : grid_(grid, fsps_extra_inertia(grid, plant)), plant_(std::move(plant)), gov_(gov) {
  gov_.validate();
  if (plant_.p_set.size() != plant_.units.size())
    throw Error(ErrorKind::ConfigInvalid, "dispatch list must match unit count");

  x0_ = VectorXd::Zero(n_x());
  const double h_s = plant_.tunnel.static_head;
  for (int i = 0; i < n_units(); ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    double p_set = plant_.p_set[static_cast<std::size_t>(i)];
    double lo = plant_.chart.gate_axis().front(), hi = plant_.chart.gate_axis().back();
    for (int it = 0; it < 100; ++it) {
      double mid = 0.5 * (lo + hi);
      double h_mid = h_s / (1.0 + prm.friction * mid * mid);
      if (plant_.chart.power(mid, 1.0, h_mid, true).p_m < p_set)
        lo = mid;
      else
        hi = mid;
    }
    double gate = 0.5 * (lo + hi);
    double head = h_s / (1.0 + prm.friction * gate * gate);
    x0_(idx_gate(i)) = gate;
    x0_(idx_flow(i)) = gate * std::sqrt(head);
    g0_.push_back(gate);
    p_m0_.push_back(p_set);
  }
}

int FspsModel::n_x() const { return grid_.n_states() + 4 * n_units(); }
int FspsModel::idx_gov(int i) const { return grid_.n_states() + 4 * i; }
int FspsModel::idx_td(int i) const { return grid_.n_states() + 4 * i + 1; }
int FspsModel::idx_gate(int i) const { return grid_.n_states() + 4 * i + 2; }
int FspsModel::idx_flow(int i) const { return grid_.n_states() + 4 * i + 3; }

double FspsModel::mechanical_power(const VectorXd& x, int i) const {
  double speed = 1.0 + x(grid_.idx_domega());
  double g = x(idx_gate(i));
  double h = turbine_head(x(idx_flow(i)), g);
  return plant_.chart.power(g, speed, h, true).p_m;
}

double FspsModel::external_injection(const VectorXd& x) const {
  double p = 0.0;
  for (int i = 0; i < n_units(); ++i)
    p += (mechanical_power(x, i) - p_m0_[static_cast<std::size_t>(i)]) *
         plant_.units[static_cast<std::size_t>(i)].s_mva / grid_.params().s_base_mva;
  return p;
}

double FspsModel::frequency_derivative(const VectorXd& x, double d_load) const {
  VectorXd grid_part = x.head(grid_.n_states());
  return grid_.deriv(grid_part, external_injection(x), d_load, true)(grid_.idx_domega());
}

double FspsModel::electrical_power(const VectorXd& x, int i, double d_load) const {
  const auto& prm = plant_.units[static_cast<std::size_t>(i)];
  double speed = 1.0 + x(grid_.idx_domega());
  return mechanical_power(x, i) - 2.0 * prm.h_inertia * speed * frequency_derivative(x, d_load);
}

TruthStepResult FspsModel::fsps_plant_step(const VectorXd& x, double d_load, double dt) const {
  if (x.size() != n_x()) throw Error(ErrorKind::DimensionMismatch, "fsps state size mismatch");
  TruthStepResult out;
  out.x = x;

  const double domega = x(grid_.idx_domega());

  // common-tunnel coupling frozen over the step
  std::vector<VspsState> states(static_cast<std::size_t>(n_units()));
  for (int i = 0; i < n_units(); ++i) {
    auto& s = states[static_cast<std::size_t>(i)];
    s.g = x(idx_gate(i));
    s.q = x(idx_flow(i));
  }
  PenstockCoupling coupling = shared_penstock_couple(states, plant_.units, plant_.tunnel);

  double p_ext = external_injection(x);

  // transient droop: gate gain 1/(R+r) immediately, washing out to 1/R
  const double r_total = gov_.droop + gov_.temp_droop;
  const double slow_gain = 1.0 / gov_.droop - 1.0 / r_total;
  const double t_lag = gov_.reset_time * r_total / gov_.droop;

  for (int i = 0; i < n_units(); ++i) {
    const auto& prm = plant_.units[static_cast<std::size_t>(i)];
    double h_b = coupling.boundary_head[static_cast<std::size_t>(i)];
    Eigen::Vector4d y0;
    y0 << x(idx_gov(i)), x(idx_td(i)), x(idx_gate(i)), x(idx_flow(i));

    auto rhs = [&](const Eigen::Vector4d& y) {
      Eigen::Vector4d d;
      double td_target = slow_gain * (-domega);
      d(1) = (td_target - y(1)) / t_lag;
      double cmd = -domega / r_total + y(1);
      d(0) = (cmd - y(0)) / gov_.t_gov;
      double g_cmd = std::clamp(g0_[static_cast<std::size_t>(i)] + y(0), 0.0, 1.0);
      double rate = (g_cmd - y(2)) / prm.t_g;
      if (std::abs(rate) > prm.g_rate_max) {
        rate = std::copysign(prm.g_rate_max, rate);
        out.rate_clamped = true;
      }
      d(2) = rate;
      d(3) = (h_b - turbine_head(y(3), y(2)) - prm.friction * y(3) * y(3)) / prm.t_w;
      return d;
    };

    Eigen::Vector4d k1 = rhs(y0);
    Eigen::Vector4d k2 = rhs(y0 + 0.5 * dt * k1);
    Eigen::Vector4d k3 = rhs(y0 + 0.5 * dt * k2);
    Eigen::Vector4d k4 = rhs(y0 + dt * k3);
    Eigen::Vector4d y1 = y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);

    out.x(idx_gov(i)) = y1(0);
    out.x(idx_td(i)) = y1(1);
    out.x(idx_gate(i)) = std::clamp(y1(2), 0.0, 1.0);
    out.x(idx_flow(i)) = y1(3);
  }

  VectorXd grid_part = x.head(grid_.n_states());
  out.x.head(grid_.n_states()) = grid_.step_grid(grid_part, p_ext, d_load, dt, true);
  return out;
}

void VicConfig::validate() const {
  if (!(k_inertia >= 0.0 && k_droop >= 0.0))
    throw Error(ErrorKind::ConfigInvalid, "VIC gains must be non-negative");
  if (!(washout_time > 0.0)) throw Error(ErrorKind::ConfigInvalid, "washout time must be positive");
  if (!(gov_kp >= 0.0 && gov_ki >= 0.0))
    throw Error(ErrorKind::ConfigInvalid, "VIC governor gains must be non-negative");
}

double vic_command(const std::vector<double>& domega_history, const VicConfig& cfg, double dt) {
  if (domega_history.size() < 2)
    throw Error(ErrorKind::EmptyTrace, "vic_command needs at least two samples");
  // washout-filtered derivative: exact zero-order-hold recursion of the
  // first-order filter state
  const double a = std::exp(-dt / cfg.washout_time);
  double f = domega_history.front();
  for (std::size_t k = 1; k < domega_history.size(); ++k)
    f = a * f + (1.0 - a) * domega_history[k - 1];
  double deriv = (domega_history.back() - f) / cfg.washout_time;
  return -cfg.k_inertia * deriv - cfg.k_droop * domega_history.back();
}

VicController::VicController(const SystemModel& model, VicConfig cfg, double dt_ctrl)
    : model_(model), cfg_(cfg), dt_ctrl_(dt_ctrl), u_prev_(model.equilibrium_input()) {
  cfg_.validate();
  speed_integral_.assign(static_cast<std::size_t>(model.n_units()), 0.0);
}

VectorXd VicController::cycle(const VectorXd& y) {
  const auto& idx = model_.idx();
  history_.push_back(y(0));
  double dp = history_.size() >= 2 ? vic_command(history_, cfg_, dt_ctrl_) : 0.0;

  // Feedforward terms are steady-state-efficiency corrections around the
  // dispatch trim, evaluated at the static head, so the controller is exactly
  // quiescent at the dispatch equilibrium.
  const double h_s = model_.plant().tunnel.static_head;
  VectorXd u = u_prev_;
  for (int i = 0; i < model_.n_units(); ++i) {
    const auto& prm = model_.plant().units[static_cast<std::size_t>(i)];
    const auto& chart = model_.plant().chart;
    double p_set = model_.pe_base(i);
    double p_star = p_set + dp;

    double w_eq = model_.equilibrium_state()(idx.unit_omega(i));
    double g_eq = model_.equilibrium_input()(idx.iu_g(i));
    double w_star = std::clamp(w_eq + optimal_speed(p_star, h_s, chart, prm, true) -
                                   optimal_speed(p_set, h_s, chart, prm, true),
                               prm.omega_r_min, prm.omega_r_max);
    double g_ref =
        g_eq + chart.gate_for_power(p_star, w_star, h_s) - chart.gate_for_power(p_set, w_eq, h_s);

    double w_meas = y(1 + 3 * i);
    double err = w_star - w_meas;
    auto& integral = speed_integral_[static_cast<std::size_t>(i)];
    integral = std::clamp(integral + err * dt_ctrl_, -0.5, 0.5);

    u(idx.iu_p(i)) = p_star;
    u(idx.iu_g(i)) = std::clamp(g_ref + cfg_.gov_kp * err + cfg_.gov_ki * integral, 0.0, 1.0);
  }
  u_prev_ = u;
  return u;
}

}  // namespace vspsfc
