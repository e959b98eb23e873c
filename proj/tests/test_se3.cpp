#include "bt/se3.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <numbers>

using namespace bt;
using test::Rng;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("exp_map of the zero twist is the identity") {
  const Pose3d T = exp_map(Twist6d::Zero());
  CHECK(T.rotation.isIdentity(0));
  CHECK(T.translation.isZero(0));
}

TEST_CASE("exp_map of a quarter turn about z") {
  Twist6d xi = Twist6d::Zero();
  xi[5] = kPi / 2;
  Eigen::Matrix3d expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Pose3d T = exp_map(xi);
  CHECK((T.rotation - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(T.translation.isZero(0));
}

TEST_CASE("exp_map of a pure translation") {
  Twist6d xi = Twist6d::Zero();
  xi.head<3>() << 0.3, -1.2, 2.5;
  const Pose3d T = exp_map(xi);
  CHECK(T.rotation.isIdentity(0));
  CHECK((T.translation - xi.head<3>()).norm() == 0.0);
}

TEST_CASE("exp_map rotation agrees with an angle-axis oracle") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const Twist6d xi = test::random_twist(rng, kPi);
    CHECK((exp_map(xi).rotation - test::angle_axis(xi.tail<3>())).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("log_map of the identity is zero") { CHECK(log_map(Pose3d::Identity()).isZero(0)); }

TEST_CASE("exp/log round trip over 1000 random twists") {
  Rng rng(2);
  double worst = 0;
  for (int k = 0; k < 1000; ++k) {
    const Twist6d xi = test::random_twist(rng, kPi - 0.1, 2.0);
    worst = std::max(worst, (log_map(exp_map(xi)) - xi).norm());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("round trip stays accurate at tiny angles") {
  for (double angle : {0.0, 1e-12, 1e-9, 1e-7, 1e-5, 1e-3}) {
    Twist6d xi;
    xi << 0.4, -0.2, 0.9, 0, 0, 0;
    xi.tail<3>() = Eigen::Vector3d(1, 2, -2).normalized() * angle;
    CHECK((log_map(exp_map(xi)) - xi).norm() < 1e-12);
  }
}

TEST_CASE("log_map of a half turn about x") {
  Pose3d T;
  T.rotation = Eigen::Quaterniond(0, 1, 0, 0).toRotationMatrix();
  const Twist6d xi = log_map(T);
  CHECK((xi.tail<3>() - Eigen::Vector3d(kPi, 0, 0)).norm() < 1e-12);
  CHECK(xi.head<3>().isZero(0));
}

TEST_CASE("log_map near a half turn recovers the axis") {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const Eigen::Vector3d axis = test::random_unit(rng);
    const double angle = kPi - std::pow(10.0, -test::uniform(rng, 2, 12));
    Pose3d T;
    T.rotation = test::angle_axis(axis * angle);
    const Eigen::Vector3d w = log_map(T).tail<3>();
    CHECK(std::abs(w.norm() - angle) < 1e-7);
    CHECK((exp_map(log_map(T)).rotation - T.rotation).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("group axioms") {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const Pose3d A = test::random_pose(rng), B = test::random_pose(rng), C = test::random_pose(rng);
    CHECK(test::pose_distance(compose(A, inverse(A)), Pose3d::Identity()) < 1e-12);
    CHECK(test::pose_distance(compose(inverse(A), A), Pose3d::Identity()) < 1e-12);
    CHECK(test::pose_distance(compose(Pose3d::Identity(), B), B) == 0.0);
    CHECK(test::pose_distance(compose(compose(A, B), C), compose(A, compose(B, C))) < 1e-12);
  }
}

TEST_CASE("compose acts on points as a matrix product") {
  Rng rng(5);
  const Pose3d A = test::random_pose(rng), B = test::random_pose(rng);
  const Eigen::Vector3d p(0.1, -0.4, 2.0);
  const Eigen::Vector4d ph = A.matrix() * B.matrix() * p.homogeneous();
  CHECK((compose(A, B) * p - ph.head<3>()).norm() < 1e-12);
}

TEST_CASE("boxplus identities") {
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const Twist6d xi = test::random_twist(rng, 2.5), delta = test::random_twist(rng, 0.5, 0.2);
    CHECK(boxplus(xi, Twist6d(Twist6d::Zero())) == xi);
    CHECK((boxplus(Twist6d(Twist6d::Zero()), delta) - delta).norm() < 1e-12);
    CHECK(test::pose_distance(exp_map(boxplus(xi, delta)), compose(exp_map(delta), exp_map(xi))) < 1e-10);
  }
}

TEST_CASE("boxplus is first-order linear in the increment") {
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const Twist6d xi = test::random_twist(rng, 2.5), delta = test::random_twist(rng, 1.0, 1.0);
    // e(eps) = J eps delta + O(eps^2), so e(eps) - 2 e(eps / 2) = O(eps^2).
    auto e = [&](double eps) { return Twist6d(boxplus(xi, Twist6d(eps * delta)) - xi); };
    const double r1 = (e(1e-3) - 2 * e(5e-4)).norm();
    const double r2 = (e(1e-4) - 2 * e(5e-5)).norm();
    CHECK(r1 < 1e-4);
    CHECK(r2 < r1 / 50);
  }
}

TEST_CASE("rotation_geodesic values and metric axioms") {
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  CHECK(rotation_geodesic(I, I) == 0.0);
  CHECK(std::abs(rotation_geodesic(I, test::angle_axis({0, 0, kPi / 2})) - kPi / 2) < 1e-12);

  Rng rng(8);
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Matrix3d A = test::angle_axis(test::random_rotvec(rng, kPi));
    const Eigen::Matrix3d B = test::angle_axis(test::random_rotvec(rng, kPi));
    const Eigen::Matrix3d C = test::angle_axis(test::random_rotvec(rng, kPi));
    const double ab = rotation_geodesic(A, B), ba = rotation_geodesic(B, A);
    CHECK(rotation_geodesic(A, A) < 1e-9);
    CHECK(std::abs(ab - ba) < 1e-9);
    CHECK(ab <= rotation_geodesic(A, C) + rotation_geodesic(C, B) + 1e-9);
    CHECK(ab >= 0.0);
    CHECK(ab <= kPi);
  }
}

TEST_CASE("project and unproject") {
  const Intrinsics K{500, 500, 320, 240, 640, 480};
  CHECK(*project<double>({0, 0, 1}, K) == Eigen::Vector2d(320, 240));
  CHECK((*project<double>({0.1, 0, 1}, K) - Eigen::Vector2d(370, 240)).norm() < 1e-12);
  CHECK(*unproject<double>(320, 240, 2.5, K) == Eigen::Vector3d(0, 0, 2.5));
  const Intrinsics K_short{200, 200, 320, 240, 640, 480};  // keeps u = cx + fx inside the image
  CHECK(std::abs(unproject<double>(320 + 200, 240, 2.0, K_short)->x() - 2.0) < 1e-12);

  CHECK_FALSE(project<double>({0, 0, 0}, K));
  CHECK_FALSE(project<double>({0, 0, -1}, K));
  CHECK_FALSE(unproject<double>(10, 10, 0.0, K));
  CHECK_FALSE(unproject<double>(10, 10, -1.0, K));
  CHECK_FALSE(unproject<double>(-3, 10, 1.0, K));
  CHECK_FALSE(unproject<double>(10, 480, 1.0, K));

  Rng rng(9);
  for (int k = 0; k < 1000; ++k) {
    const double u = test::uniform(rng, 0, 639), v = test::uniform(rng, 0, 479), d = test::uniform(rng, 0.1, 10);
    const Eigen::Vector2d px = *project(*unproject(u, v, d, K), K);
    CHECK((px - Eigen::Vector2d(u, v)).norm() < 1e-9);
  }
}
