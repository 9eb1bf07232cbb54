#include "vspsfc/linearize.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace vspsfc {

ContinuousJacobians linearize_at(const OperatingPoint& op, const SystemModel& model) {
  const auto& idx = model.idx();
  for (int i = 0; i < idx.n_units; ++i) {
    double g = op.x(idx.unit_gate(i));
    double w = op.x(idx.unit_omega(i));
    if (!(g >= 0.0 && g <= 1.0))
      throw Error(ErrorKind::DegenerateOperatingPoint, "gate outside [0, 1] at linearization point");
    if (!(w > 0.0))
      throw Error(ErrorKind::DegenerateOperatingPoint, "non-positive rotor speed at linearization point");
  }
  if (!(1.0 + op.x(idx.domega()) > 0.0))
    throw Error(ErrorKind::DegenerateOperatingPoint, "non-positive grid frequency at linearization point");
  try {
    return model.jacobians(op.x, op.u, op.d_load);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::OutOfChart)
      throw Error(ErrorKind::DegenerateOperatingPoint, std::string("hill-chart partial outside hull: ") + e.what());
    throw;
  }
}

LinearModel discretize(const ContinuousJacobians& jc, double dt_pred, const OperatingPoint& op,
                       const MatrixXd& c_meas) {
  if (!(dt_pred > 0.0)) throw Error(ErrorKind::ConfigInvalid, "dt_pred must be positive");
  const int nx = static_cast<int>(jc.a.rows());
  const int nu = static_cast<int>(jc.b.cols());
  const int nd = static_cast<int>(jc.e.cols());

  MatrixXd aug = MatrixXd::Zero(nx + nu + nd + 1, nx + nu + nd + 1);
  aug.topLeftCorner(nx, nx) = jc.a;
  aug.block(0, nx, nx, nu) = jc.b;
  aug.block(0, nx + nu, nx, nd) = jc.e;
  aug.block(0, nx + nu + nd, nx, 1) = jc.f;
  MatrixXd phi = (aug * dt_pred).exp();

  LinearModel m;
  m.a = phi.topLeftCorner(nx, nx);
  m.b = phi.block(0, nx, nx, nu);
  m.e = phi.block(0, nx + nu, nx, nd);
  VectorXd w = phi.block(0, nx + nu + nd, nx, 1);
  m.c = c_meas;
  m.dt = dt_pred;
  m.op = op;
  // Affine term in absolute coordinates: the increment recursion
  // dx+ = A dx + B du + E dd + w around (x_op, u_op, d_op).
  m.f0 = w + op.x - m.a * op.x - m.b * op.u - m.e * VectorXd::Constant(nd, op.d_load);
  return m;
}

}  // namespace vspsfc
