#include "vspsfc/grid.hpp"

#include <algorithm>
#include <cmath>

namespace vspsfc {

void GridParams::validate() const {
  if (!(h_sys > 0.0)) throw Error(ErrorKind::ConfigInvalid, "h_sys must be positive");
  if (!(d_sys >= 0.0) || !(f_sys >= 0.0))
    throw Error(ErrorKind::ConfigInvalid, "damping coefficients must be non-negative");
  if (!(s_base_mva > 0.0)) throw Error(ErrorKind::ConfigInvalid, "s_base_mva must be positive");
  for (const auto& u : sync_units) {
    if (!(u.s_mva > 0.0 && u.droop > 0.0 && u.t_gov > 0.0 && u.t_turb > 0.0))
      throw Error(ErrorKind::ConfigInvalid, "sync unit parameters must be positive");
    if (!(u.hp_fraction >= 0.0 && u.hp_fraction <= 1.0))
      throw Error(ErrorKind::ConfigInvalid, "hp_fraction must lie in [0, 1]");
  }
  if (battery.s_mva > 0.0 && !(battery.droop > 0.0 && battery.t_lag > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "battery droop and lag must be positive");
}

double Disturbance::load_at(double t) const {
  double d = 0.0;
  for (const auto& e : events) {
    if (e.time <= t) d += e.delta_p_load;
  }
  return d;
}

void Disturbance::validate() const {
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (!(events[i].time > events[i - 1].time))
      throw Error(ErrorKind::ConfigInvalid, "disturbance event times must be strictly increasing");
  }
}

GridModel::GridModel(GridParams params, double extra_inertia)
    : params_(std::move(params)), extra_inertia_(extra_inertia) {
  params_.validate();
}

double GridModel::internal_generation(const VectorXd& x) const {
  double p = 0.0;
  for (std::size_t j = 0; j < params_.sync_units.size(); ++j) {
    const auto& u = params_.sync_units[j];
    double p_unit = u.hp_fraction * x(idx_gov(static_cast<int>(j))) +
                    (1.0 - u.hp_fraction) * x(idx_turb(static_cast<int>(j)));
    p += p_unit * u.s_mva / params_.s_base_mva;
  }
  if (params_.battery.s_mva > 0.0) p += x(idx_batt()) * params_.battery.s_mva / params_.s_base_mva;
  return p;
}

VectorXd GridModel::deriv(const VectorXd& x, double p_external, double d_load, bool apply_limits) const {
  VectorXd dx = VectorXd::Zero(x.size());
  const double domega = x(idx_domega());

  double p_gen = internal_generation(x) + p_external;
  dx(idx_domega()) = (p_gen - d_load - params_.d_sys * domega) / (2.0 * inertia());

  for (std::size_t j = 0; j < params_.sync_units.size(); ++j) {
    const auto& u = params_.sync_units[j];
    int jg = idx_gov(static_cast<int>(j));
    int jt = idx_turb(static_cast<int>(j));
    double cmd = -domega / u.droop;
    if (apply_limits) cmd = std::clamp(cmd, -1.0, 1.0);
    dx(jg) = (cmd - x(jg)) / u.t_gov;
    dx(jt) = (x(jg) - x(jt)) / u.t_turb;
  }

  if (params_.battery.s_mva > 0.0) {
    double cmd = -domega / params_.battery.droop;
    if (apply_limits) cmd = std::clamp(cmd, -1.0, 1.0);
    dx(idx_batt()) = (cmd - x(idx_batt())) / params_.battery.t_lag;
  }
  return dx;
}

VectorXd GridModel::step_grid(const VectorXd& x, double p_external, double d_load, double dt,
                              bool apply_limits) const {
  if (x.size() != n_states()) throw Error(ErrorKind::DimensionMismatch, "grid state size mismatch");
  VectorXd k1 = deriv(x, p_external, d_load, apply_limits);
  VectorXd k2 = deriv(x + 0.5 * dt * k1, p_external, d_load, apply_limits);
  VectorXd k3 = deriv(x + 0.5 * dt * k2, p_external, d_load, apply_limits);
  VectorXd k4 = deriv(x + dt * k3, p_external, d_load, apply_limits);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

NadirMetrics nadir_metrics(const std::vector<double>& time, const std::vector<double>& domega) {
  if (time.empty() || time.size() != domega.size())
    throw Error(ErrorKind::EmptyTrace, "nadir_metrics needs a non-empty trace");

  NadirMetrics m;
  std::size_t i_nadir = 0;
  for (std::size_t i = 0; i < domega.size(); ++i) {
    if (std::abs(domega[i]) > std::abs(domega[i_nadir])) i_nadir = i;
  }
  m.nadir = domega[i_nadir];
  m.t_nadir = time[i_nadir];

  for (std::size_t i = 1; i < domega.size(); ++i) {
    double slope = (domega[i] - domega[i - 1]) / (time[i] - time[i - 1]);
    if (std::abs(slope) > std::abs(m.rocof_max)) m.rocof_max = slope;
  }

  const double final_value = domega.back();
  const double band = 0.1 * std::abs(m.nadir);
  std::size_t entry = domega.size() - 1;
  for (std::size_t i = domega.size(); i-- > 0;) {
    if (std::abs(domega[i] - final_value) <= band)
      entry = i;
    else
      break;
  }
  m.settling_band_entry = time[entry];
  return m;
}

}  // namespace vspsfc
