#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace bt {

/// Tangent vector of SE(3). Ordering is fixed: translation part first
/// (coefficients 0..2, meters), rotation part second (3..5, axis-angle radians).
template <typename Scalar>
using Twist = Eigen::Matrix<Scalar, 6, 1>;

using Twist6d = Twist<double>;
using Matrix6d = Eigen::Matrix<double, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;

template <typename Derived>
auto twist_translation(const Eigen::MatrixBase<Derived>& xi) { return xi.template head<3>(); }

template <typename Derived>
auto twist_rotation(const Eigen::MatrixBase<Derived>& xi) { return xi.template tail<3>(); }

/// Rigid transform, object frame to camera frame.
template <typename Scalar>
struct Pose {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static Pose Identity() { return Pose{}; }

  static Pose from_matrix(const Matrix4& m) {
    return Pose{m.template topLeftCorner<3, 3>(), m.template topRightCorner<3, 1>()};
  }

  Matrix4 matrix() const {
    Matrix4 m = Matrix4::Identity();
    m.template topLeftCorner<3, 3>() = rotation;
    m.template topRightCorner<3, 1>() = translation;
    return m;
  }

  Vector3 operator*(const Vector3& p) const { return rotation * p + translation; }

  Pose operator*(const Pose& rhs) const {
    return Pose{rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  template <typename Other>
  Pose<Other> cast() const {
    return Pose<Other>{rotation.template cast<Other>(), translation.template cast<Other>()};
  }

  /// Orthonormality and determinant check.
  bool is_valid(Scalar tol = Scalar(1e-9)) const {
    const Scalar ortho = (rotation.transpose() * rotation - Matrix3::Identity()).cwiseAbs().maxCoeff();
    using std::abs;
    return rotation.allFinite() && translation.allFinite() && ortho < tol &&
           abs(rotation.determinant() - Scalar(1)) < tol;
  }
};

using Pose3d = Pose<double>;

template <typename Scalar>
Pose<Scalar> compose(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return a * b;
}

template <typename Scalar>
Pose<Scalar> inverse(const Pose<Scalar>& t) {
  Pose<Scalar> inv;
  inv.rotation = t.rotation.transpose();
  inv.translation = -(inv.rotation * t.translation);
  return inv;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> hat(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, 3, 3> m;
  m << Scalar(0), -w(2), w(1),
       w(2), Scalar(0), -w(0),
       -w(1), w(0), Scalar(0);
  return m;
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> vee(const Eigen::MatrixBase<Derived>& m) {
  return {m(2, 1), m(0, 2), m(1, 0)};
}

namespace detail {

// Below this angle the Rodrigues coefficients switch to Taylor series.
inline constexpr double kSmallAngle = 1e-8;

// Coefficients (sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3).
template <typename Scalar>
void so3_coefficients(Scalar theta, Scalar& a, Scalar& b, Scalar& c) {
  using std::cos;
  using std::sin;
  if (theta < Scalar(kSmallAngle)) {
    const Scalar t2 = theta * theta;
    a = Scalar(1) - t2 / Scalar(6);
    b = Scalar(0.5) - t2 / Scalar(24);
    c = Scalar(1) / Scalar(6) - t2 / Scalar(120);
    return;
  }
  const Scalar half = theta / Scalar(2);
  const Scalar sinc_half = sin(half) / half;
  a = sin(theta) / theta;
  b = Scalar(0.5) * sinc_half * sinc_half;
  c = (theta - sin(theta)) / (theta * theta * theta);
}

}  // namespace detail

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 3> so3_exp(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  const Scalar theta = w.norm();
  Scalar a, b, c;
  detail::so3_coefficients(theta, a, b, c);
  const Eigen::Matrix<Scalar, 3, 3> W = hat(w);
  return Eigen::Matrix<Scalar, 3, 3>::Identity() + a * W + b * W * W;
}

/// Rotation logarithm with angle in [0, pi]. Angles close to pi recover the
/// axis from the symmetric part of R (largest diagonal of R + I).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, 3, 1> so3_log(const Eigen::MatrixBase<Derived>& R) {
  using Scalar = typename Derived::Scalar;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  using std::atan2;
  using std::sqrt;

  const Vector3 v = vee(R - R.transpose()) / Scalar(2);  // sin(theta) * axis
  const Scalar s = v.norm();
  const Scalar c = (R.trace() - Scalar(1)) / Scalar(2);
  const Scalar theta = atan2(s, c);

  if (theta < Scalar(detail::kSmallAngle)) {
    return v * (Scalar(1) + theta * theta / Scalar(6));
  }
  if (c > Scalar(-0.5)) {
    return v * (theta / s);
  }
  // Near pi: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) a a^T.
  Eigen::Matrix<Scalar, 3, 3> B = (R + R.transpose()) / Scalar(2);
  B.diagonal().array() -= c;
  Eigen::Index k = 0;
  (R.diagonal().array() + Scalar(1)).maxCoeff(&k);
  Vector3 axis = B.col(k).normalized();
  if (axis.dot(v) < Scalar(0)) axis = -axis;
  return axis * theta;
}

template <typename Derived>
Pose<typename Derived::Scalar> exp_map(const Eigen::MatrixBase<Derived>& xi) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Matrix<Scalar, 3, 1> w = xi.template tail<3>();
  const Eigen::Matrix<Scalar, 3, 1> rho = xi.template head<3>();
  const Scalar theta = w.norm();
  Scalar a, b, c;
  detail::so3_coefficients(theta, a, b, c);
  const Eigen::Matrix<Scalar, 3, 3> W = hat(w);
  const Eigen::Matrix<Scalar, 3, 3> WW = W * W;
  const auto I = Eigen::Matrix<Scalar, 3, 3>::Identity();
  Pose<Scalar> T;
  T.rotation = I + a * W + b * WW;
  T.translation = (I + b * W + c * WW) * rho;
  return T;
}

template <typename Scalar>
Twist<Scalar> log_map(const Pose<Scalar>& T) {
  using std::cos;
  using std::sin;
  const Eigen::Matrix<Scalar, 3, 1> w = so3_log(T.rotation);
  const Scalar theta = w.norm();
  const Eigen::Matrix<Scalar, 3, 3> W = hat(w);
  const auto I = Eigen::Matrix<Scalar, 3, 3>::Identity();
  Scalar d;
  if (theta < Scalar(detail::kSmallAngle)) {
    d = Scalar(1) / Scalar(12) + theta * theta / Scalar(720);
  } else {
    const Scalar half = theta / Scalar(2);
    d = (Scalar(1) - half * cos(half) / sin(half)) / (theta * theta);
  }
  const Eigen::Matrix<Scalar, 3, 3> V_inv = I - Scalar(0.5) * W + d * W * W;
  Twist<Scalar> xi;
  xi.template head<3>() = V_inv * T.translation;
  xi.template tail<3>() = w;
  return xi;
}

/// Left-multiplicative retraction: exp(result) = exp(delta) * exp(xi).
template <typename Scalar>
Twist<Scalar> boxplus(const Twist<Scalar>& xi, const Twist<Scalar>& delta) {
  if (delta.isZero(0)) return xi;
  return log_map(compose(exp_map(delta), exp_map(xi)));
}

/// Angle of the relative rotation Ri^T Rj, in [0, pi]. Equal to
/// arccos((tr - 1) / 2), evaluated through atan2 so small angles keep full
/// precision.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar rotation_geodesic(const Eigen::MatrixBase<DerivedA>& Ri,
                                            const Eigen::MatrixBase<DerivedB>& Rj) {
  using Scalar = typename DerivedA::Scalar;
  using std::atan2;
  const Eigen::Matrix<Scalar, 3, 3> M = Ri.transpose() * Rj;
  const Scalar s = vee(M - M.transpose()).norm() / Scalar(2);
  const Scalar c = (M.trace() - Scalar(1)) / Scalar(2);
  return atan2(s, c);
}

template <typename Scalar>
Scalar rotation_geodesic(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return rotation_geodesic(a.rotation, b.rotation);
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct Intrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  bool is_valid() const {
    return fx > 0 && fy > 0 && cx >= 0 && cx < width && cy >= 0 && cy < height;
  }
};

/// Pinhole projection; empty for points at or behind the camera plane.
template <typename Scalar>
std::optional<Eigen::Matrix<Scalar, 2, 1>> project(const Eigen::Matrix<Scalar, 3, 1>& p,
                                                   const Intrinsics& K) {
  if (!(p.z() > Scalar(0))) return std::nullopt;
  return Eigen::Matrix<Scalar, 2, 1>(Scalar(K.fx) * p.x() / p.z() + Scalar(K.cx),
                                     Scalar(K.fy) * p.y() / p.z() + Scalar(K.cy));
}

/// Back-projection of pixel (u, v) at depth d; empty for non-positive depth
/// or pixels outside the image.
template <typename Scalar>
std::optional<Eigen::Matrix<Scalar, 3, 1>> unproject(Scalar u, Scalar v, Scalar d, const Intrinsics& K) {
  if (!(d > Scalar(0))) return std::nullopt;
  if (u < Scalar(-0.5) || v < Scalar(-0.5) || u > Scalar(K.width) - Scalar(0.5) ||
      v > Scalar(K.height) - Scalar(0.5))
    return std::nullopt;
  return Eigen::Matrix<Scalar, 3, 1>((u - Scalar(K.cx)) * d / Scalar(K.fx),
                                     (v - Scalar(K.cy)) * d / Scalar(K.fy), d);
}

}  // namespace bt
