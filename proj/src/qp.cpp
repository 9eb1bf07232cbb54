#include "vspsfc/qp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace vspsfc {

namespace {

constexpr double kLambdaTol = 1e-10;
constexpr double kDirTol = 1e-12;
constexpr double kActiveTol = 1e-9;
constexpr double kInf = std::numeric_limits<double>::infinity();

void finalize(const QpProblem& qp, QpSolution& sol) {
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.objective = 0.5 * sol.z.dot(qp.h * sol.z) + qp.g.dot(sol.z) + qp.constant;
  sol.kkt = kkt_residuals(qp, sol.z, sol.lambda);
}

// Equality-KKT re-solve on the final working set; keeps the result only when
// it stays primal feasible and dual non-negative.
void polish(const QpProblem& qp, QpSolution& sol) {
  const int n = qp.n_vars();
  const int k = static_cast<int>(sol.active_set.size());
  MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = qp.h;
  for (int i = 0; i < k; ++i) {
    kkt.block(n + i, 0, 1, n) = qp.a_ineq.row(sol.active_set[static_cast<std::size_t>(i)]);
    kkt.block(0, n + i, n, 1) = qp.a_ineq.row(sol.active_set[static_cast<std::size_t>(i)]).transpose();
  }
  VectorXd rhs(n + k);
  rhs.head(n) = -qp.g;
  for (int i = 0; i < k; ++i) rhs(n + i) = qp.b_ineq(sol.active_set[static_cast<std::size_t>(i)]);

  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(kkt);
  VectorXd zl = cod.solve(rhs);
  VectorXd z = zl.head(n);

  double feas_tol = kActiveTol * std::max(1.0, qp.n_rows() ? qp.b_ineq.lpNorm<Eigen::Infinity>() : 0.0);
  if (qp.n_rows() > 0 && (qp.a_ineq * z - qp.b_ineq).maxCoeff() > feas_tol) return;
  for (int i = 0; i < k; ++i)
    if (zl(n + i) < -1e-7 * (1.0 + std::abs(zl(n + i)))) return;

  sol.z = z;
  sol.lambda.setZero();
  for (int i = 0; i < k; ++i)
    sol.lambda(sol.active_set[static_cast<std::size_t>(i)]) = std::max(0.0, zl(n + i));
}

/// Goldfarb-Idnani dual active-set method for strictly convex problems.
QpSolution solve_qp_dual(const QpProblem& qp, const Eigen::LLT<MatrixXd>& llt) {
  const int n = qp.n_vars();
  const int m = qp.n_rows();

  QpSolution sol;
  sol.z = llt.solve(-qp.g);
  sol.lambda = VectorXd::Zero(m);
  if (m == 0) {
    sol.status = QpStatus::Optimal;
    finalize(qp, sol);
    return sol;
  }

  std::vector<int> active;
  std::vector<double> lam;
  const double btol = kActiveTol * std::max(1.0, qp.b_ineq.lpNorm<Eigen::Infinity>());

  const int max_outer = 10 * m + 100;
  bool converged = false;
  for (int outer = 0; outer < max_outer; ++outer) {
    // most violated row
    VectorXd slack = qp.b_ineq - qp.a_ineq * sol.z;
    int p = -1;
    double worst = -btol;
    for (int i = 0; i < m; ++i) {
      if (slack(i) < worst) {
        worst = slack(i);
        p = i;
      }
    }
    if (p < 0) {
      converged = true;
      break;
    }

    // constraint normal in the ">=" orientation
    VectorXd n_plus = -qp.a_ineq.row(p).transpose();
    double lam_plus = 0.0;

    bool added = false;
    for (int inner = 0; inner <= n + m && !added; ++inner) {
      ++sol.iterations;
      const int q = static_cast<int>(active.size());
      VectorXd ginv_np = llt.solve(n_plus);
      VectorXd r;
      VectorXd d_z;
      if (q > 0) {
        MatrixXd nmat(n, q);
        for (int j = 0; j < q; ++j)
          nmat.col(j) = -qp.a_ineq.row(active[static_cast<std::size_t>(j)]).transpose();
        MatrixXd ginv_n = llt.solve(nmat);
        MatrixXd mred = nmat.transpose() * ginv_n;
        r = mred.ldlt().solve(nmat.transpose() * ginv_np);
        d_z = ginv_np - ginv_n * r;
      } else {
        d_z = ginv_np;
      }

      // step to zero an active multiplier
      double t1 = kInf;
      int j1 = -1;
      for (int j = 0; j < q; ++j) {
        if (r(j) > kDirTol) {
          double tj = lam[static_cast<std::size_t>(j)] / r(j);
          if (tj < t1) {
            t1 = tj;
            j1 = j;
          }
        }
      }

      // step to satisfy the incoming row
      double s_p = qp.b_ineq(p) - qp.a_ineq.row(p).dot(sol.z);
      double dtn = n_plus.dot(d_z);
      double t2 = dtn > kDirTol ? -s_p / dtn : kInf;

      double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        // no progress possible: the problem is infeasible in exact arithmetic
        sol.status = QpStatus::MaxIterations;
        for (int j = 0; j < q; ++j)
          sol.lambda(active[static_cast<std::size_t>(j)]) = lam[static_cast<std::size_t>(j)];
        sol.active_set = active;
        finalize(qp, sol);
        return sol;
      }

      for (int j = 0; j < q; ++j) lam[static_cast<std::size_t>(j)] -= t * r(j);
      lam_plus += t;
      if (std::isfinite(t2)) sol.z += t * d_z;

      if (t == t2 && t2 <= t1) {
        active.push_back(p);
        lam.push_back(lam_plus);
        added = true;
      } else {
        // drop the exhausted row and retry the same incoming one
        active.erase(active.begin() + j1);
        lam.erase(lam.begin() + j1);
      }
    }
    if (!added && !converged) {
      sol.status = QpStatus::MaxIterations;
      break;
    }
  }

  sol.status = converged ? QpStatus::Optimal : sol.status;
  if (!converged && sol.status != QpStatus::MaxIterations) sol.status = QpStatus::MaxIterations;
  sol.lambda.setZero();
  for (std::size_t j = 0; j < active.size(); ++j)
    sol.lambda(active[j]) = std::max(0.0, lam[j]);
  sol.active_set = active;
  if (converged) polish(qp, sol);
  finalize(qp, sol);
  return sol;
}

/// Primal active-set fallback for positive semidefinite Hessians; needs a
/// feasible starting point.
QpSolution solve_qp_primal(const QpProblem& qp, const VectorXd& z_start) {
  const int n = qp.n_vars();
  const int m = qp.n_rows();

  QpSolution sol;
  sol.z = z_start;
  sol.lambda = VectorXd::Zero(m);

  std::vector<int> working;
  std::vector<char> in_working(static_cast<std::size_t>(m), 0);
  if (m > 0) {
    VectorXd resid = qp.a_ineq * sol.z - qp.b_ineq;
    for (int i = 0; i < m; ++i) {
      if (resid(i) > -kActiveTol && static_cast<int>(working.size()) < n) {
        working.push_back(i);
        in_working[static_cast<std::size_t>(i)] = 1;
      }
    }
  }

  const int max_iter = 50 * (n + m + 1);
  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    const int k = static_cast<int>(working.size());
    MatrixXd kkt = MatrixXd::Zero(n + k, n + k);
    kkt.topLeftCorner(n, n) = qp.h;
    for (int i = 0; i < k; ++i) {
      kkt.block(n + i, 0, 1, n) = qp.a_ineq.row(working[static_cast<std::size_t>(i)]);
      kkt.block(0, n + i, n, 1) = qp.a_ineq.row(working[static_cast<std::size_t>(i)]).transpose();
    }
    VectorXd rhs = VectorXd::Zero(n + k);
    rhs.head(n) = -(qp.h * sol.z + qp.g);

    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(kkt);
    VectorXd pw = cod.solve(rhs);
    VectorXd p = pw.head(n);

    const double step_tol = 1e-9 * (1.0 + sol.z.lpNorm<Eigen::Infinity>());
    if (p.lpNorm<Eigen::Infinity>() <= step_tol) {
      int drop = -1;
      double most_negative = -kLambdaTol;
      for (int i = 0; i < k; ++i) {
        double li = pw(n + i);
        if (li < most_negative) {
          most_negative = li;
          drop = i;
        }
      }
      if (drop < 0) {
        sol.lambda.setZero();
        for (int i = 0; i < k; ++i)
          sol.lambda(working[static_cast<std::size_t>(i)]) = std::max(0.0, pw(n + i));
        sol.status = QpStatus::Optimal;
        break;
      }
      in_working[static_cast<std::size_t>(working[static_cast<std::size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (in_working[static_cast<std::size_t>(i)]) continue;
      double ap = qp.a_ineq.row(i).dot(p);
      if (ap > kDirTol) {
        double ai = (qp.b_ineq(i) - qp.a_ineq.row(i).dot(sol.z)) / ap;
        if (ai < alpha) {
          alpha = ai;
          blocking = i;
        }
      }
    }
    if (alpha > 0.0) sol.z += alpha * p;
    if (blocking >= 0 && static_cast<int>(working.size()) < n + 1) {
      working.push_back(blocking);
      in_working[static_cast<std::size_t>(blocking)] = 1;
    }
  }

  if (sol.iterations >= max_iter) sol.status = QpStatus::MaxIterations;
  sol.active_set = working;
  finalize(qp, sol);
  return sol;
}

bool strictly_convex(const QpProblem& qp, Eigen::LLT<MatrixXd>& llt) {
  llt.compute(qp.h);
  if (llt.info() != Eigen::Success) return false;
  double dmin = llt.matrixLLT().diagonal().minCoeff();
  double dmax = llt.matrixLLT().diagonal().maxCoeff();
  return dmin > 1e-10 * std::max(1.0, dmax);
}

}  // namespace

double KktResiduals::max_rel() const { return std::max({stationarity, primal, complementarity, dual}); }

KktResiduals kkt_residuals(const QpProblem& qp, const VectorXd& z, const VectorXd& lambda) {
  KktResiduals r;
  VectorXd grad = qp.h * z + qp.g;
  VectorXd stat = grad;
  if (qp.n_rows() > 0) stat += qp.a_ineq.transpose() * lambda;
  double scale = std::max(1.0, std::max(qp.g.lpNorm<Eigen::Infinity>(), (qp.h * z).lpNorm<Eigen::Infinity>()));
  r.stationarity = stat.lpNorm<Eigen::Infinity>() / scale;

  if (qp.n_rows() > 0) {
    VectorXd slack = qp.b_ineq - qp.a_ineq * z;
    double bscale = std::max(1.0, qp.b_ineq.lpNorm<Eigen::Infinity>());
    r.primal = std::max(0.0, -slack.minCoeff()) / bscale;
    double comp = 0.0;
    double dual = 0.0;
    for (int i = 0; i < qp.n_rows(); ++i) {
      comp = std::max(comp, std::abs(lambda(i) * slack(i)));
      dual = std::max(dual, -lambda(i));
    }
    r.complementarity = comp / std::max(1.0, scale);
    r.dual = dual / std::max(1.0, scale);
  }
  return r;
}

QpSolution solve_qp(const QpProblem& qp, const VectorXd& z_start) {
  const int n = qp.n_vars();
  const int m = qp.n_rows();
  if (qp.g.size() != n || qp.h.cols() != n || (m > 0 && qp.b_ineq.size() != m) ||
      (m > 0 && qp.a_ineq.cols() != n) || z_start.size() != n)
    throw Error(ErrorKind::DimensionMismatch, "QP dimension mismatch");

  Eigen::LLT<MatrixXd> llt;
  if (strictly_convex(qp, llt)) return solve_qp_dual(qp, llt);
  return solve_qp_primal(qp, z_start);
}

QpSolution solve_qp(const QpProblem& qp) {
  const int n = qp.n_vars();
  Eigen::LLT<MatrixXd> llt;
  if (strictly_convex(qp, llt)) return solve_qp_dual(qp, llt);

  // semidefinite fallback needs a feasible start
  VectorXd zero = VectorXd::Zero(n);
  auto feasible = [&](const VectorXd& z) {
    if (qp.n_rows() == 0) return true;
    return ((qp.a_ineq * z - qp.b_ineq).maxCoeff() <= kActiveTol);
  };
  if (feasible(zero)) return solve_qp_primal(qp, zero);
  VectorXd z_uc = qp.h.ldlt().solve(-qp.g);
  if (feasible(z_uc)) return solve_qp_primal(qp, z_uc);
  throw Error(ErrorKind::NonPhysical,
              "semidefinite QP without an obvious feasible start; provide one explicitly");
}

}  // namespace vspsfc
