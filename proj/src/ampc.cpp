#include "vspsfc/ampc.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace vspsfc {

void AmpcConfig::validate(int n_units) const {
  if (!(control_horizon >= 1 && control_horizon <= prediction_horizon))
    throw Error(ErrorKind::ConfigInvalid, "need 1 <= control_horizon <= prediction_horizon");
  if (!(weight_pcc >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "weight_pcc must be non-negative");
  if (static_cast<int>(weight_rotor.size()) != n_units)
    throw Error(ErrorKind::ConfigInvalid, "weight_rotor must have one entry per unit");
  double sum = weight_pcc;
  for (double w : weight_rotor) {
    if (!(w >= 0.0)) throw Error(ErrorKind::ConfigInvalid, "rotor weights must be non-negative");
    sum += w;
  }
  if (!(sum > 0.0)) throw Error(ErrorKind::ConfigInvalid, "at least one tracking weight must be positive");
  if (!(input_penalty >= 0.0 && slack_penalty > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "input_penalty must be >= 0 and slack_penalty > 0");
  if (!(dt_ctrl > 0.0)) throw Error(ErrorKind::ConfigInvalid, "dt_ctrl must be positive");
  if (!(imbalance_filter_time > 0.0 && drift_filter_time > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "imbalance filter times must be positive");
  for (const auto& [s, droop] : reference_units) {
    if (!(s > 0.0 && droop > 0.0))
      throw Error(ErrorKind::ConfigInvalid, "reference units need positive capacity and droop");
  }
}

double reference_target(const std::vector<std::pair<double, double>>& units, double f_sys, double dp_imb) {
  double s_sum = 0.0, gain_sum = 0.0;
  for (const auto& [s, droop] : units) {
    s_sum += s;
    gain_sum += s / droop;
  }
  return s_sum / (gain_sum + f_sys) * dp_imb;
}

QpBuild build_qp(const LinearModel& model, const ConstraintSet& cs, const VectorXd& x_hat,
                 const ReferenceTargets& refs, const AmpcConfig& cfg, const StateIndex& idx) {
  const int nx = model.n_x();
  const int nu = model.n_u();
  const int horizon = cs.horizon;
  const int n_c = cs.control_horizon;
  if (x_hat.size() != nx) throw Error(ErrorKind::DimensionMismatch, "x_hat size mismatch");
  if (static_cast<int>(refs.omega_r.size()) != idx.n_units)
    throw Error(ErrorKind::DimensionMismatch, "reference speed count mismatch");
  cfg.validate(idx.n_units);
  if (horizon != cfg.prediction_horizon || n_c != cfg.control_horizon)
    throw Error(ErrorKind::DimensionMismatch, "constraint set horizons disagree with the config");

  const int n_cmd = n_c * nu;
  const VectorXd dx0 = x_hat - model.op.x;
  const VectorXd drift = model.increment_drift();

  // powers of A and accumulated drift
  std::vector<MatrixXd> phi(static_cast<std::size_t>(horizon) + 1);
  std::vector<VectorXd> acc(static_cast<std::size_t>(horizon) + 1);
  phi[0] = MatrixXd::Identity(nx, nx);
  acc[0] = VectorXd::Zero(nx);
  for (int mstep = 1; mstep <= horizon; ++mstep) {
    phi[static_cast<std::size_t>(mstep)] = model.a * phi[static_cast<std::size_t>(mstep - 1)];
    acc[static_cast<std::size_t>(mstep)] = model.a * acc[static_cast<std::size_t>(mstep - 1)] + drift;
  }

  // gamma[m]: dx(m) = phi[m] dx0 + gamma[m] * U + acc[m]
  std::vector<MatrixXd> gamma(static_cast<std::size_t>(horizon) + 1,
                              MatrixXd::Zero(nx, n_cmd));
  for (int mstep = 1; mstep <= horizon; ++mstep) {
    auto& gm = gamma[static_cast<std::size_t>(mstep)];
    gm = model.a * gamma[static_cast<std::size_t>(mstep - 1)];
    int k = std::min(mstep - 1, n_c - 1);
    gm.middleCols(k * nu, nu) += model.b;
  }

  // slack groups: one per (unit, label) pair that appears among soft rows
  std::map<std::pair<int, int>, int> slack_group;
  QpBuild out;
  for (const auto& row : cs.rows) {
    if (!row.soft) continue;
    auto key = std::make_pair(row.unit, static_cast<int>(row.label));
    if (slack_group.find(key) == slack_group.end()) {
      int id = static_cast<int>(slack_group.size());
      slack_group[key] = id;
      out.slack_names.push_back(std::string(to_string(row.label)) + "." + std::to_string(row.unit + 1));
    }
  }
  const int n_slack = static_cast<int>(slack_group.size());
  const int n_z = n_cmd + n_slack;

  QpProblem qp;
  qp.h = MatrixXd::Zero(n_z, n_z);
  qp.g = VectorXd::Zero(n_z);
  qp.h.topLeftCorner(n_cmd, n_cmd) = cfg.input_penalty * MatrixXd::Identity(n_cmd, n_cmd);
  for (int s = 0; s < n_slack; ++s) qp.h(n_cmd + s, n_cmd + s) = 2.0 * cfg.slack_penalty;

  // Tracking terms run over the current step (a constant in the decision
  // variables, droppable via objective_from_step_one) plus every predicted
  // step through the horizon, so a one-step problem is already meaningful.
  const int m_start = cfg.objective_from_step_one ? 1 : 0;
  auto add_tracking = [&](int state_ix, double weight, double target_abs) {
    if (weight <= 0.0) return;
    for (int mstep = m_start; mstep <= horizon; ++mstep) {
      double c0 = model.op.x(state_ix) - target_abs;
      if (mstep == 0) {
        // current step: no input dependence, contributes a constant only
        double e0 = c0 + dx0(state_ix);
        qp.constant += 0.5 * weight * e0 * e0;
        continue;
      }
      const auto& gm = gamma[static_cast<std::size_t>(mstep)];
      Eigen::RowVectorXd gr = gm.row(state_ix);
      double cm = c0 + phi[static_cast<std::size_t>(mstep)].row(state_ix).dot(dx0) +
                  acc[static_cast<std::size_t>(mstep)](state_ix);
      qp.h.topLeftCorner(n_cmd, n_cmd) += weight * gr.transpose() * gr;
      qp.g.head(n_cmd) += weight * cm * gr.transpose();
      qp.constant += 0.5 * weight * cm * cm;
    }
  };

  add_tracking(idx.domega(), cfg.weight_pcc, refs.domega_pcc);
  for (int i = 0; i < idx.n_units; ++i)
    add_tracking(idx.unit_omega(i), cfg.weight_rotor[static_cast<std::size_t>(i)], refs.omega_r(i));

  // inequality rows mapped through the rollout
  const int n_rows = static_cast<int>(cs.rows.size()) + n_slack;
  qp.a_ineq = MatrixXd::Zero(n_rows, n_z);
  qp.b_ineq = VectorXd::Zero(n_rows);
  VectorXd slack_start = VectorXd::Zero(n_slack);

  int r = 0;
  for (const auto& row : cs.rows) {
    double rhs = row.rhs;
    for (const auto& [ix, c] : row.state_coeffs) {
      int mstep = row.step;
      if (mstep == 0) {
        rhs -= c * dx0(ix);
        continue;
      }
      qp.a_ineq.row(r).head(n_cmd) += c * gamma[static_cast<std::size_t>(mstep)].row(ix);
      rhs -= c * (phi[static_cast<std::size_t>(mstep)].row(ix).dot(dx0) +
                  acc[static_cast<std::size_t>(mstep)](ix));
    }
    for (const auto& [flat, c] : row.input_coeffs) {
      if (flat < 0 || flat >= n_cmd)
        throw Error(ErrorKind::DimensionMismatch, "constraint input index outside the control horizon");
      qp.a_ineq(r, flat) += c;
    }
    if (row.soft) {
      int sg = slack_group.at(std::make_pair(row.unit, static_cast<int>(row.label)));
      qp.a_ineq(r, n_cmd + sg) = -1.0;
      slack_start(sg) = std::max(slack_start(sg), -rhs);
    }
    qp.b_ineq(r) = rhs;
    out.row_names.push_back(std::string(to_string(row.label)) + "." + std::to_string(row.unit + 1) + "@" +
                            std::to_string(row.step));
    ++r;
  }
  for (int s = 0; s < n_slack; ++s) {
    qp.a_ineq(r, n_cmd + s) = -1.0;
    qp.b_ineq(r) = 0.0;
    out.row_names.push_back("slack_nonneg." + out.slack_names[static_cast<std::size_t>(s)]);
    ++r;
  }

  out.qp = std::move(qp);
  out.n_cmd = n_cmd;
  out.n_slack = n_slack;
  out.z_start = VectorXd::Zero(n_z);
  out.z_start.tail(n_slack) = slack_start;
  return out;
}

AmpcController::AmpcController(SystemModel model, AmpcConfig cfg, double q_proc, double r_meas)
    : model_(std::move(model)),
      cfg_(std::move(cfg)),
      kf_(model_.equilibrium_state(),
          MatrixXd::Identity(model_.idx().n_x(), model_.idx().n_x()) * 1e-6,
          MatrixXd::Identity(model_.idx().n_x(), model_.idx().n_x()) * q_proc,
          MatrixXd::Identity(model_.idx().n_y(), model_.idx().n_y()) * r_meas),
      c_meas_(model_.measurement_matrix()),
      u_prev_(model_.equilibrium_input()) {
  cfg_.validate(model_.n_units());
  if (cfg_.reference_units.empty())
    throw Error(ErrorKind::ConfigInvalid, "ampc reference_units must not be empty");
  relinearize(model_.equilibrium_state());
  refs_.omega_r = VectorXd::Zero(model_.n_units());
}

void AmpcController::relinearize(const VectorXd& x_hat) {
  OperatingPoint op{x_hat, u_prev_, d_hat_};
  ContinuousJacobians jc = linearize_at(op, model_);
  lin_ = discretize(jc, cfg_.dt_ctrl, op, c_meas_);
}

ControlOutput AmpcController::cycle(const VectorXd& y) {
  const auto& idx = model_.idx();
  kf_.predict(lin_, u_prev_, d_hat_);
  kf_.update(y, c_meas_);
  const VectorXd& x_hat = kf_.state();

  // Load-step estimate from the swing residual. The prediction drift uses a
  // lightly smoothed estimate so the preview sees a sustained deficit right
  // away; the reference distribution uses the slower configured filter.
  double domega = x_hat(idx.domega());
  double rocof = has_prev_domega_ ? (domega - prev_domega_) / cfg_.dt_ctrl : 0.0;
  prev_domega_ = domega;
  has_prev_domega_ = true;
  double gen = model_.grid().internal_generation(x_hat.head(model_.grid().n_states())) +
               model_.external_injection(x_hat);
  double residual = gen - model_.grid().params().d_sys * domega - 2.0 * model_.grid().inertia() * rocof;
  double alpha_fast = 1.0 - std::exp(-cfg_.dt_ctrl / cfg_.drift_filter_time);
  d_hat_ += alpha_fast * (residual - d_hat_);
  double alpha_ref = 1.0 - std::exp(-cfg_.dt_ctrl / cfg_.imbalance_filter_time);
  d_ref_ += alpha_ref * (residual - d_ref_);

  ControlOutput out;
  out.u_applied = u_prev_;
  try {
    relinearize(x_hat);

    ConstraintSet cs = build_constraint_set({x_hat, u_prev_, d_hat_}, model_.plant().units, idx,
                                            cfg_.prediction_horizon, cfg_.control_horizon, cfg_.dt_ctrl,
                                            cfg_.use_printed_dyn_gain);

    double s_pu_sum = 0.0;
    std::vector<std::pair<double, double>> ref_units_pu;
    for (const auto& [s, droop] : cfg_.reference_units) {
      double s_pu = s / model_.grid().params().s_base_mva;
      ref_units_pu.push_back({s_pu, droop});
      s_pu_sum += s_pu;
    }
    refs_.domega_pcc =
        reference_target(ref_units_pu, model_.grid().params().f_sys, -d_ref_ / s_pu_sum);
    refs_.omega_r = VectorXd::Zero(model_.n_units());
    for (int i = 0; i < model_.n_units(); ++i) {
      double p_latest = u_prev_(idx.iu_p(i));
      double head = turbine_head(x_hat(idx.unit_flow(i)), x_hat(idx.unit_gate(i)));
      refs_.omega_r(i) =
          optimal_speed(p_latest, head, model_.plant().chart, model_.plant().units[static_cast<std::size_t>(i)],
                        /*clamp_to_hull=*/true);
    }

    QpBuild qb = build_qp(lin_, cs, x_hat, refs_, cfg_, idx);
    QpSolution sol = solve_qp(qb.qp, qb.z_start);

    out.status = sol.status;
    out.objective = sol.objective;
    out.kkt = sol.kkt;
    for (int a : sol.active_set)
      out.active_labels.push_back(qb.row_names[static_cast<std::size_t>(a)]);
    out.max_slack = qb.n_slack > 0 ? sol.z.tail(qb.n_slack).maxCoeff() : 0.0;

    if (sol.status != QpStatus::Optimal) {
      out.latched = true;
      ++solver_failures_;
      return out;
    }

    const int nu = idx.n_u();
    out.dp_star = MatrixXd::Zero(model_.n_units(), cfg_.control_horizon);
    out.dg_star = MatrixXd::Zero(model_.n_units(), cfg_.control_horizon);
    for (int k = 0; k < cfg_.control_horizon; ++k) {
      for (int i = 0; i < model_.n_units(); ++i) {
        double p_abs = u_prev_(idx.iu_p(i)) + sol.z(k * nu + idx.iu_p(i));
        double g_abs = u_prev_(idx.iu_g(i)) + sol.z(k * nu + idx.iu_g(i));
        out.dp_star(i, k) = p_abs - model_.equilibrium_input()(idx.iu_p(i));
        out.dg_star(i, k) = g_abs - model_.equilibrium_input()(idx.iu_g(i));
      }
    }
    u_prev_ += sol.z.head(nu);
    out.u_applied = u_prev_;
  } catch (const Error&) {
    out.latched = true;
    ++solver_failures_;
  }
  return out;
}

}  // namespace vspsfc
