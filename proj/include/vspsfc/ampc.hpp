#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vspsfc/common.hpp"
#include "vspsfc/constraints.hpp"
#include "vspsfc/estimator.hpp"
#include "vspsfc/linearize.hpp"
#include "vspsfc/qp.hpp"
#include "vspsfc/system_model.hpp"

namespace vspsfc {

struct AmpcConfig {
  int prediction_horizon = 30;
  int control_horizon = 5;
  double weight_pcc = 1.0;
  std::vector<double> weight_rotor;  // one per unit
  double input_penalty = 1e-4;
  double slack_penalty = 1e6;
  double dt_ctrl = 0.1;
  bool objective_from_step_one = false;
  bool use_printed_dyn_gain = false;
  std::vector<std::pair<double, double>> reference_units;  // (capacity, droop) pairs
  double imbalance_filter_time = 1.0;  // reference-distribution estimate
  double drift_filter_time = 0.4;      // prediction-drift estimate

  void validate(int n_units) const;
};

/// Frequency-deviation target from the droop-based distribution of a power
/// imbalance across the participating units plus system damping.
double reference_target(const std::vector<std::pair<double, double>>& units, double f_sys, double dp_imb);

struct ReferenceTargets {
  double domega_pcc = 0.0;
  VectorXd omega_r;
};

/// Condensed QP over the stacked command increments plus one slack per soft
/// constraint group.
struct QpBuild {
  QpProblem qp;
  int n_cmd = 0;
  int n_slack = 0;
  VectorXd z_start;
  std::vector<std::string> row_names;
  std::vector<std::string> slack_names;
};

QpBuild build_qp(const LinearModel& model, const ConstraintSet& cs, const VectorXd& x_hat,
                 const ReferenceTargets& refs, const AmpcConfig& cfg, const StateIndex& idx);

struct ControlOutput {
  MatrixXd dp_star;  // n_units x N_c, additional power command relative to dispatch
  MatrixXd dg_star;  // n_units x N_c, vane command relative to the dispatch gate
  VectorXd u_applied;  // absolute command held over the coming interval
  QpStatus status = QpStatus::Optimal;
  bool latched = false;
  double objective = 0.0;
  KktResiduals kkt;
  std::vector<std::string> active_labels;
  double max_slack = 0.0;
};

/// Receding-horizon controller: estimate, relinearize, rebuild constraints
/// and references, solve the QP and apply the first move. On solver failure
/// the previous command is held and the cycle flagged.
class AmpcController {
 public:
  AmpcController(SystemModel model, AmpcConfig cfg, double q_proc = 1e-6, double r_meas = 1e-8);

  ControlOutput cycle(const VectorXd& y);

  const VectorXd& command() const { return u_prev_; }
  const VectorXd& estimate() const { return kf_.state(); }
  const MatrixXd& covariance() const { return kf_.covariance(); }
  double imbalance_estimate() const { return d_hat_; }
  const LinearModel& model() const { return lin_; }
  const SystemModel& system() const { return model_; }
  long solver_failures() const { return solver_failures_; }
  ReferenceTargets last_references() const { return refs_; }

 private:
  SystemModel model_;
  AmpcConfig cfg_;
  KalmanFilter kf_;
  MatrixXd c_meas_;
  LinearModel lin_;
  VectorXd u_prev_;
  double d_hat_ = 0.0;        // fast estimate driving the prediction drift
  double d_ref_ = 0.0;        // slow estimate feeding the reference distribution
  double prev_domega_ = 0.0;
  bool has_prev_domega_ = false;
  long solver_failures_ = 0;
  ReferenceTargets refs_;

  void relinearize(const VectorXd& x_hat);
};

}  // namespace vspsfc
