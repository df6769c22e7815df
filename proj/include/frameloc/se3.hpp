#pragma once

// Rigid-body arithmetic on SO(3) / SE(3): hat and vee maps, the closed-form
// exponential, composition and inversion of poses, and Gram-Schmidt
// orthonormalization with determinant-sign correction.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cmath>
#include <string>

#include "frameloc/errors.hpp"

namespace frameloc {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kRotationTolerance = 1e-9;
inline constexpr double kSkewTolerance = 1e-9;
inline constexpr double kGsopRankThreshold = 1e-10;
inline constexpr double kExpSeriesThreshold = 1e-6;

/// Frobenius norm of (r^T r - I).
[[nodiscard]] inline double orthogonality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).norm();
}

// ---------------------------------------------------------------------------
// Rotation
// ---------------------------------------------------------------------------

/// A proper rotation matrix. Construction validates orthonormality and
/// det = +1 to kRotationTolerance.
class Rotation {
 public:
  Rotation() : r_(Mat3::Identity()) {}

  [[nodiscard]] static Rotation from_matrix(const Mat3& r) {
    const double orth = orthogonality_error(r);
    const double det = r.determinant();
    if (!(orth <= kRotationTolerance) || !(std::abs(det - 1.0) <= kRotationTolerance)) {
      throw InvalidArgument("not a rotation matrix (|r^T r - I|_F = " + std::to_string(orth) +
                            ", det = " + std::to_string(det) + ")");
    }
    return Rotation(r);
  }

  [[nodiscard]] static bool is_valid(const Mat3& r) {
    return orthogonality_error(r) <= kRotationTolerance &&
           std::abs(r.determinant() - 1.0) <= kRotationTolerance;
  }

  [[nodiscard]] const Mat3& matrix() const noexcept { return r_; }
  [[nodiscard]] Rotation transpose() const { return Rotation(r_.transpose()); }
  [[nodiscard]] Rotation operator*(const Rotation& o) const { return Rotation(r_ * o.r_); }
  [[nodiscard]] Vec3 operator*(const Vec3& v) const { return r_ * v; }

  bool operator==(const Rotation& o) const { return r_ == o.r_; }

 private:
  explicit Rotation(const Mat3& r) : r_(r) {}
  Mat3 r_;
};

// ---------------------------------------------------------------------------
// Pose and Twist
// ---------------------------------------------------------------------------

struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  [[nodiscard]] static Pose identity() { return {}; }

  /// Homogeneous 4x4 form [R p; 0 1].
  [[nodiscard]] Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  /// Validates the rotation block and requires the bottom row (0,0,0,1) exactly.
  [[nodiscard]] static Pose from_matrix(const Mat4& m) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
      throw InvalidArgument("pose bottom row must be (0,0,0,1)");
    }
    return {Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()};
  }

  bool operator==(const Pose& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

/// Body-frame velocity: linear (length/time) and angular (rad/time).
struct Twist {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();

  bool operator==(const Twist& o) const { return linear == o.linear && angular == o.angular; }
};

// ---------------------------------------------------------------------------
// AuxMatrix
// ---------------------------------------------------------------------------

/// Estimator state [Q q; 0 1] living in the ambient space of 4x4 matrices.
/// Q is not constrained to SO(3).
struct AuxMatrix {
  Mat3 block = Mat3::Identity();
  Vec3 vec = Vec3::Zero();

  [[nodiscard]] Mat4 matrix() const {
    Mat4 m = Mat4::Identity();
    m.topLeftCorner<3, 3>() = block;
    m.topRightCorner<3, 1>() = vec;
    return m;
  }

  [[nodiscard]] static AuxMatrix from_matrix(const Mat4& m) {
    if (m(3, 0) != 0.0 || m(3, 1) != 0.0 || m(3, 2) != 0.0 || m(3, 3) != 1.0) {
      throw InvalidArgument("auxiliary matrix bottom row must be (0,0,0,1)");
    }
    return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
  }

  bool operator==(const AuxMatrix& o) const { return block == o.block && vec == o.vec; }
};

// ---------------------------------------------------------------------------
// hat / vee
// ---------------------------------------------------------------------------

/// hat3(w) * x == w.cross(x)
[[nodiscard]] inline Mat3 hat3(const Vec3& w) {
  Mat3 s;
  // clang-format off
  s <<  0.0,  -w.z(),  w.y(),
        w.z(),  0.0,  -w.x(),
       -w.y(),  w.x(),  0.0;
  // clang-format on
  return s;
}

[[nodiscard]] inline Vec3 vee3(const Mat3& m) {
  const double asym = (m + m.transpose()).norm();
  if (!(asym <= kSkewTolerance)) {
    throw InvalidArgument("vee3: matrix is not skew-symmetric (|m + m^T|_F = " +
                          std::to_string(asym) + ")");
  }
  return {m(2, 1), m(0, 2), m(1, 0)};
}

/// [hat3(angular) linear; 0 0]
[[nodiscard]] inline Mat4 hat6(const Twist& t) {
  Mat4 m = Mat4::Zero();
  m.topLeftCorner<3, 3>() = hat3(t.angular);
  m.topRightCorner<3, 1>() = t.linear;
  return m;
}

[[nodiscard]] inline Twist vee6(const Mat4& m) {
  if (!(m.row(3).cwiseAbs().maxCoeff() <= kSkewTolerance)) {
    throw InvalidArgument("vee6: bottom row of an se(3) matrix must be zero");
  }
  return {m.topRightCorner<3, 1>(), vee3(m.topLeftCorner<3, 3>())};
}

// ---------------------------------------------------------------------------
// Exponential map
// ---------------------------------------------------------------------------

/// exp(dt * hat6(t)) in closed form (Rodrigues rotation and the SE(3)
/// V-matrix). Falls back to a Taylor expansion of the coefficients when the
/// rotation angle |w| dt is below kExpSeriesThreshold.
[[nodiscard]] inline Pose exp_se3(const Twist& t, double dt) {
  const Vec3 phi = t.angular * dt;
  const Vec3 rho = t.linear * dt;
  const double theta = phi.norm();
  const Mat3 w = hat3(phi);
  const Mat3 w2 = w * w;

  double a = 0.0;  // sin(theta) / theta
  double b = 0.0;  // (1 - cos(theta)) / theta^2
  double c = 0.0;  // (theta - sin(theta)) / theta^3
  if (theta < kExpSeriesThreshold) {
    const double th2 = theta * theta;
    a = 1.0 - th2 / 6.0;
    b = 0.5 - th2 / 24.0;
    c = 1.0 / 6.0 - th2 / 120.0;
  } else {
    const double th2 = theta * theta;
    const double half = std::sin(theta / 2.0) / (theta / 2.0);
    a = std::sin(theta) / theta;
    b = 0.5 * half * half;  // (1 - cos) / theta^2 without the cancellation
    c = (theta - std::sin(theta)) / (th2 * theta);
  }

  const Mat3 r = Mat3::Identity() + a * w + b * w2;
  const Mat3 v = Mat3::Identity() + b * w + c * w2;
  return {Rotation::from_matrix(r), v * rho};
}

// ---------------------------------------------------------------------------
// Group operations
// ---------------------------------------------------------------------------

[[nodiscard]] inline Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

/// [R^T, -R^T p; 0 1]
[[nodiscard]] inline Pose inverse(const Pose& a) {
  const Rotation rt = a.rotation.transpose();
  return {rt, -(rt * a.translation)};
}

/// T_i^{-1} T_j: the pose of frame j expressed in frame i.
[[nodiscard]] inline Pose relative_transform(const Pose& t_i, const Pose& t_j) {
  const Rotation rt = t_i.rotation.transpose();
  return {rt * t_j.rotation, rt * (t_j.translation - t_i.translation)};
}

// ---------------------------------------------------------------------------
// Gram-Schmidt orthonormalization
// ---------------------------------------------------------------------------

namespace detail {

// Orthogonal residual of z against the orthonormal columns q[0..k). Projects
// twice so the result stays orthogonal to machine precision for poorly
// conditioned inputs; the exact-arithmetic value is unchanged.
inline Vec3 gram_residual(const Vec3& z, const Mat3& q, int k) {
  Vec3 v = z;
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < k; ++j) {
      v -= v.dot(q.col(j)) * q.col(j);
    }
  }
  return v;
}

inline Vec3 unit_or_throw(const Vec3& v, int k) {
  const double len = v.norm();
  if (!(len > kGsopRankThreshold)) {
    throw DegenerateInput(static_cast<std::size_t>(k),
                          "gsop: columns are linearly dependent (residual of column " +
                              std::to_string(k + 1) + " has norm " + std::to_string(len) + ")");
  }
  return v / len;
}

}  // namespace detail

/// Orthonormalizes the columns of m in order. The last column is
/// sign-corrected so that det = +1. Throws DegenerateInput when an
/// intermediate residual has norm <= kGsopRankThreshold.
[[nodiscard]] inline Rotation gsop(const Mat3& m) {
  Mat3 q = Mat3::Zero();
  for (int k = 0; k < 3; ++k) {
    q.col(k) = detail::unit_or_throw(detail::gram_residual(m.col(k), q, k), k);
  }
  if (q.determinant() < 0.0) {
    q.col(2) = -q.col(2);
  }
  return Rotation::from_matrix(q);
}

/// Orthonormalizes the first two columns of m; the third is their cross
/// product. The third column of m is ignored.
[[nodiscard]] inline Rotation gsop_two_column(const Mat3& m) {
  Mat3 q = Mat3::Zero();
  for (int k = 0; k < 2; ++k) {
    q.col(k) = detail::unit_or_throw(detail::gram_residual(m.col(k), q, k), k);
  }
  q.col(2) = q.col(0).cross(q.col(1));
  return Rotation::from_matrix(q);
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// sqrt(tr((a-b)^T (a-b))).
template <typename DerivedA, typename DerivedB>
[[nodiscard]] double frobenius_distance(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument("frobenius_distance: dimension mismatch");
  }
  return (a - b).norm();
}

}  // namespace frameloc
