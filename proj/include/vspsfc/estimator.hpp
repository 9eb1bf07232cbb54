#pragma once

#include "vspsfc/common.hpp"
#include "vspsfc/linearize.hpp"

namespace vspsfc {

/// Discrete Kalman filter over the current affine model. Covariance updates
/// use the Joseph form and are symmetrized every step.
class KalmanFilter {
 public:
  KalmanFilter(VectorXd x0, MatrixXd p0, MatrixXd q_proc, MatrixXd r_meas);

  void predict(const LinearModel& model, const VectorXd& u, double d_load);

  /// Measurement update with the given output matrix; uses the filter's
  /// configured measurement covariance.
  void update(const VectorXd& y, const MatrixXd& c);
  void update(const VectorXd& y, const MatrixXd& c, const MatrixXd& r_meas);

  const VectorXd& state() const { return x_; }
  const MatrixXd& covariance() const { return p_; }
  void set_state(const VectorXd& x) { x_ = x; }

 private:
  VectorXd x_;
  MatrixXd p_, q_, r_;
};

}  // namespace vspsfc
