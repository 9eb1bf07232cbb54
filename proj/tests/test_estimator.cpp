#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "oracles.hpp"
#include "test_util.hpp"

#include "vspsfc/estimator.hpp"

#include <Eigen/Dense>

#include <random>

using namespace vspsfc;

namespace {

LinearModel tiny_model(const MatrixXd& a, const MatrixXd& b, const VectorXd& f0) {
  LinearModel m;
  m.a = a;
  m.b = b;
  m.e = MatrixXd::Zero(a.rows(), 1);
  m.c = MatrixXd::Identity(a.rows(), a.cols());
  m.f0 = f0;
  m.dt = 0.1;
  m.op.x = VectorXd::Zero(a.rows());
  m.op.u = VectorXd::Zero(b.cols());
  return m;
}

}  // namespace

TEST_CASE("noiseless prediction propagates exactly like the model") {
  MatrixXd a(2, 2);
  a << 0.9, 0.1, 0.0, 0.8;
  MatrixXd b(2, 1);
  b << 0.0, 0.5;
  VectorXd f0(2);
  f0 << 0.01, -0.02;
  LinearModel m = tiny_model(a, b, f0);

  VectorXd x0(2);
  x0 << 0.3, -0.4;
  KalmanFilter kf(x0, MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 2), MatrixXd::Identity(2, 2) * 1e-8);
  VectorXd u(1);
  u << 0.7;
  kf.predict(m, u, 0.0);
  VectorXd expected = m.step(x0, u, 0.0);
  CHECK((kf.state() - expected).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("identity model with zero input leaves the mean and grows the covariance") {
  LinearModel m = tiny_model(MatrixXd::Identity(2, 2), MatrixXd::Zero(2, 1), VectorXd::Zero(2));
  VectorXd x0(2);
  x0 << 1.0, 2.0;
  MatrixXd q = MatrixXd::Identity(2, 2) * 0.25;
  KalmanFilter kf(x0, MatrixXd::Identity(2, 2), q, MatrixXd::Identity(2, 2) * 1e-8);
  kf.predict(m, VectorXd::Zero(1), 0.0);
  CHECK((kf.state() - x0).lpNorm<Eigen::Infinity>() < 1e-15);
  CHECK((kf.covariance() - (MatrixXd::Identity(2, 2) + q)).lpNorm<Eigen::Infinity>() < 1e-15);
}

TEST_CASE("covariance stays symmetric over ten thousand cycles") {
  MatrixXd a(2, 2);
  a << 0.99, 0.03, -0.02, 0.97;
  LinearModel m = tiny_model(a, MatrixXd::Zero(2, 1), VectorXd::Zero(2));
  MatrixXd c(1, 2);
  c << 1.0, 0.3;
  KalmanFilter kf(VectorXd::Zero(2), MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 1e-4,
                  MatrixXd::Identity(1, 1) * 1e-3);
  VectorXd y(1);
  y << 0.1;
  for (int k = 0; k < 10000; ++k) {
    kf.predict(m, VectorXd::Zero(1), 0.0);
    kf.update(y, c, MatrixXd::Identity(1, 1) * 1e-3);
    const MatrixXd& p = kf.covariance();
    CHECK((p - p.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("an uninformative measurement leaves the estimate unchanged") {
  KalmanFilter kf(VectorXd::Ones(2), MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 1e-4,
                  MatrixXd::Identity(2, 2));
  VectorXd y(2);
  y << 100.0, -50.0;
  kf.update(y, MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 1e12);
  CHECK((kf.state() - VectorXd::Ones(2)).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("a near-exact full-state measurement snaps the estimate to it") {
  KalmanFilter kf(VectorXd::Zero(3), MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3) * 1e-4,
                  MatrixXd::Identity(3, 3));
  VectorXd y(3);
  y << 0.4, -0.2, 1.7;
  kf.update(y, MatrixXd::Identity(3, 3), MatrixXd::Identity(3, 3) * 1e-12);
  CHECK((kf.state() - y).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("singular innovation covariance is reported") {
  KalmanFilter kf(VectorXd::Zero(2), MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2) * 1e-4,
                  MatrixXd::Zero(1, 1));
  MatrixXd c = MatrixXd::Zero(1, 2);  // measures nothing, zero noise
  VectorXd y = VectorXd::Zero(1);
  CHECK_THROWS_AS(kf.update(y, c, MatrixXd::Zero(1, 1)), Error);
}

TEST_CASE("dimension mismatches are rejected") {
  KalmanFilter kf(VectorXd::Zero(2), MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2),
                  MatrixXd::Identity(1, 1));
  LinearModel m = tiny_model(MatrixXd::Identity(3, 3), MatrixXd::Zero(3, 1), VectorXd::Zero(3));
  CHECK_THROWS_AS(kf.predict(m, VectorXd::Zero(1), 0.0), Error);
}

TEST_CASE("empirical steady-state error covariance matches the Riccati fixed point") {
  MatrixXd a(2, 2);
  a << 0.95, 0.08, -0.03, 0.9;
  MatrixXd c(1, 2);
  c << 1.0, 0.0;
  MatrixXd q = MatrixXd::Identity(2, 2) * 4e-4;
  MatrixXd r = MatrixXd::Identity(1, 1) * 1e-3;

  MatrixXd p_ref = testing::riccati_fixed_point(a, c, q, r, 5000);

  std::mt19937 rng(42);
  std::normal_distribution<double> dist;
  Eigen::LLT<MatrixXd> q_chol(q);
  MatrixXd q_l = q_chol.matrixL();

  LinearModel m = tiny_model(a, MatrixXd::Zero(2, 1), VectorXd::Zero(2));
  KalmanFilter kf(VectorXd::Zero(2), MatrixXd::Identity(2, 2) * 0.01, q, r);

  VectorXd x = VectorXd::Zero(2);
  const int warmup = 500;
  const long samples = 400000;
  MatrixXd acc = MatrixXd::Zero(2, 2);
  for (long k = 0; k < warmup + samples; ++k) {
    VectorXd w(2);
    w << dist(rng), dist(rng);
    x = a * x + q_l * w;
    VectorXd y = c * x + VectorXd::Constant(1, std::sqrt(r(0, 0)) * dist(rng));
    kf.predict(m, VectorXd::Zero(1), 0.0);
    kf.update(y, c);
    if (k >= warmup) {
      VectorXd err = kf.state() - x;
      acc += err * err.transpose();
    }
  }
  MatrixXd p_emp = acc / static_cast<double>(samples);
  for (int i = 0; i < 2; ++i) {
    CAPTURE(i);
    CHECK(std::abs(p_emp(i, i) - p_ref(i, i)) / p_ref(i, i) < 0.05);
  }
  // the filter's reported covariance converges to the same fixed point
  CHECK((kf.covariance() - p_ref).lpNorm<Eigen::Infinity>() / p_ref.norm() < 1e-6);
}
