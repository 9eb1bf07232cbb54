#pragma once

#include <vector>

#include "vspsfc/common.hpp"

namespace vspsfc {

/// min 1/2 z'Hz + g'z + constant  s.t.  A z <= b, with H positive definite.
struct QpProblem {
  MatrixXd h;
  VectorXd g;
  MatrixXd a_ineq;
  VectorXd b_ineq;
  double constant = 0.0;

  int n_vars() const { return static_cast<int>(h.rows()); }
  int n_rows() const { return static_cast<int>(a_ineq.rows()); }
};

enum class QpStatus { Optimal, MaxIterations };

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;
  double dual = 0.0;  // most negative multiplier, clipped at 0

  double max_rel() const;
};

struct QpSolution {
  VectorXd z;
  VectorXd lambda;  // one multiplier per inequality row
  QpStatus status = QpStatus::Optimal;
  double objective = 0.0;
  KktResiduals kkt;
  std::vector<int> active_set;
  int iterations = 0;
};

/// Primal active-set solver from a feasible starting point.
QpSolution solve_qp(const QpProblem& qp, const VectorXd& z_start);

/// Convenience entry: starts from z = 0 when feasible, otherwise from the
/// unconstrained minimizer, otherwise from a slack-relaxation phase.
QpSolution solve_qp(const QpProblem& qp);

KktResiduals kkt_residuals(const QpProblem& qp, const VectorXd& z, const VectorXd& lambda);

}  // namespace vspsfc
