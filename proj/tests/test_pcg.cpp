#include "bt/pcg.hpp"

#include "test_util.hpp"

#include <Eigen/Cholesky>
#include <doctest.h>

using namespace bt;
using test::Rng;

namespace {

LinearOperator dense_operator(const Eigen::MatrixXd& A) {
  return [A](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = A * in; };
}

Eigen::MatrixXd random_spd(Rng& rng, int n) {
  Eigen::MatrixXd M(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) M(r, c) = test::uniform(rng, -1, 1);
  Eigen::MatrixXd A = M * M.transpose();
  A.diagonal().array() += 0.5;
  return A;
}

Eigen::VectorXd random_vector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v[k] = test::uniform(rng, -1, 1);
  return v;
}

}  // namespace

TEST_CASE("identity system converges in one iteration") {
  Rng rng(1);
  const Eigen::VectorXd b = random_vector(rng, 12);
  const auto res = pcg_solve(dense_operator(Eigen::MatrixXd::Identity(12, 12)), b, Eigen::VectorXd::Ones(12));
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK((res.x - b).norm() < 1e-15);
}

TEST_CASE("diagonal system converges in one Jacobi iteration") {
  Rng rng(2);
  Eigen::VectorXd d(20);
  for (int k = 0; k < 20; ++k) d[k] = test::uniform(rng, 0.01, 100);
  const Eigen::VectorXd b = random_vector(rng, 20);
  const auto res = pcg_solve(dense_operator(d.asDiagonal().toDenseMatrix()), b, d);
  CHECK(res.converged);
  CHECK(res.iterations == 1);
  CHECK((res.x - b.cwiseQuotient(d)).norm() / b.cwiseQuotient(d).norm() < 1e-14);
}

TEST_CASE("random SPD systems match a dense direct solve") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 30;
    const Eigen::MatrixXd A = random_spd(rng, n);
    const Eigen::VectorXd b = random_vector(rng, n);
    const Eigen::VectorXd direct = A.ldlt().solve(b);
    const auto res = pcg_solve(dense_operator(A), b, A.diagonal(), 1e-14, 500);
    CHECK_FALSE(res.degraded);
    CHECK((res.x - direct).norm() / direct.norm() < 1e-8);
  }
}

TEST_CASE("zero right-hand side returns zero") {
  const auto res = pcg_solve(dense_operator(Eigen::MatrixXd::Identity(4, 4)), Eigen::VectorXd::Zero(4),
                             Eigen::VectorXd::Ones(4));
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.x.isZero(0));
}

TEST_CASE("zero curvature direction flags a degraded solve") {
  // b has a component in the null space of A; the iteration must stop
  // with a finite iterate instead of dividing by zero.
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(3, 3);
  A(0, 0) = 2;
  const Eigen::VectorXd b = Eigen::Vector3d(0, 1, 0);
  const auto res = pcg_solve(dense_operator(A), b, A.diagonal());
  CHECK(res.degraded);
  CHECK_FALSE(res.converged);
  CHECK(res.x.allFinite());
}

TEST_CASE("non-positive diagonal entries fall back to one") {
  Rng rng(4);
  const Eigen::MatrixXd A = random_spd(rng, 8);
  const Eigen::VectorXd b = random_vector(rng, 8);
  Eigen::VectorXd diag = A.diagonal();
  diag[2] = 0;
  diag[5] = -3;
  const auto res = pcg_solve(dense_operator(A), b, diag, 1e-13, 200);
  CHECK(res.converged);
  CHECK((res.x - A.ldlt().solve(b)).norm() < 1e-9);
}

TEST_CASE("iteration cap is respected") {
  Rng rng(5);
  const Eigen::MatrixXd A = random_spd(rng, 30);
  const auto res = pcg_solve(dense_operator(A), random_vector(rng, 30), A.diagonal(), 1e-30, 3);
  CHECK(res.iterations == 3);
  CHECK_FALSE(res.converged);
}
