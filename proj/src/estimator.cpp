#include "vspsfc/estimator.hpp"

#include <Eigen/Dense>

namespace vspsfc {

KalmanFilter::KalmanFilter(VectorXd x0, MatrixXd p0, MatrixXd q_proc, MatrixXd r_meas)
    : x_(std::move(x0)), p_(std::move(p0)), q_(std::move(q_proc)), r_(std::move(r_meas)) {
  if (p_.rows() != x_.size() || p_.cols() != x_.size() || q_.rows() != x_.size() || q_.cols() != x_.size())
    throw Error(ErrorKind::DimensionMismatch, "estimator covariance dimensions inconsistent with state");
}

void KalmanFilter::predict(const LinearModel& model, const VectorXd& u, double d_load) {
  if (model.n_x() != x_.size() || model.n_u() != u.size())
    throw Error(ErrorKind::DimensionMismatch, "estimator predict dimension mismatch");
  x_ = model.step(x_, u, d_load);
  p_ = model.a * p_ * model.a.transpose() + q_;
  p_ = 0.5 * (p_ + p_.transpose()).eval();
}

void KalmanFilter::update(const VectorXd& y, const MatrixXd& c) { update(y, c, r_); }

void KalmanFilter::update(const VectorXd& y, const MatrixXd& c, const MatrixXd& r_meas) {
  if (c.cols() != x_.size() || c.rows() != y.size() || r_meas.rows() != y.size() || r_meas.cols() != y.size())
    throw Error(ErrorKind::DimensionMismatch, "estimator update dimension mismatch");

  MatrixXd s = c * p_ * c.transpose() + r_meas;
  Eigen::FullPivLU<MatrixXd> lu(s);
  if (!lu.isInvertible())
    throw Error(ErrorKind::SingularInnovation, "innovation covariance is singular");
  MatrixXd k = p_ * c.transpose() * lu.inverse();

  x_ += k * (y - c * x_);
  MatrixXd ikc = MatrixXd::Identity(x_.size(), x_.size()) - k * c;
  p_ = ikc * p_ * ikc.transpose() + k * r_meas * k.transpose();
  p_ = 0.5 * (p_ + p_.transpose()).eval();
}

}  // namespace vspsfc
