#pragma once

#include "vspsfc/common.hpp"
#include "vspsfc/system_model.hpp"

namespace vspsfc {

/// Absolute states, inputs and load-step level at the linearization point.
struct OperatingPoint {
  VectorXd x;
  VectorXd u;
  double d_load = 0.0;
};

/// Discrete-time affine model around an operating point,
///   x+ = A x + B u + E d + f0,
/// in absolute coordinates, with the measurement matrix attached.
struct LinearModel {
  MatrixXd a, b, e, c;
  VectorXd f0;
  double dt = 0.0;
  OperatingPoint op;

  int n_x() const { return static_cast<int>(a.rows()); }
  int n_u() const { return static_cast<int>(b.cols()); }

  VectorXd step(const VectorXd& x, const VectorXd& u, double d) const { return a * x + b * u + e * d + f0; }

  /// One-step drift of the operating point itself (zero at equilibrium).
  VectorXd increment_drift() const { return step(op.x, op.u, op.d_load) - op.x; }
};

/// Analytic continuous-time Jacobians of the prediction model at op.
/// Throws DegenerateOperatingPoint when op is outside the physically valid
/// range or a hill-chart partial falls outside the hull.
ContinuousJacobians linearize_at(const OperatingPoint& op, const SystemModel& model);

/// Exact zero-order-hold discretization via the matrix exponential of the
/// augmented [A B E f; 0] system.
LinearModel discretize(const ContinuousJacobians& jc, double dt_pred, const OperatingPoint& op,
                       const MatrixXd& c_meas);

}  // namespace vspsfc
