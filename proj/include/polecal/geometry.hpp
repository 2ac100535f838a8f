#ifndef POLECAL_GEOMETRY_HPP
#define POLECAL_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>

#include "polecal/error.hpp"

namespace polecal {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Quaternion as [w, x, y, z].
using Quat4 = Eigen::Vector4d;

inline Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

/// Proper rotation stored as an orthonormal 3x3 matrix.
///
/// Matrices are the working representation (no normalization drift when
/// composed inside the optimizer); quaternions are accepted and produced at
/// external boundaries only.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  /// Wraps a matrix, verifying orthonormality and det = +1 to 1e-9.
  static Rotation from_matrix(const Mat3& m) {
    if (((m.transpose() * m) - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        std::abs(m.determinant() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument, "matrix is not a proper rotation");
    }
    return Rotation(m);
  }

  /// Accepts [w, x, y, z]; the quaternion is normalized on entry.
  static Rotation from_quaternion(double w, double x, double y, double z) {
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw Error(ErrorCode::InvalidArgument, "zero or non-finite quaternion");
    }
    Eigen::Quaterniond q(w / n, x / n, y / n, z / n);
    return Rotation(q.toRotationMatrix());
  }

  static Rotation from_quaternion(const Quat4& q) {
    return from_quaternion(q[0], q[1], q[2], q[3]);
  }

  static Rotation from_axis_angle(const Vec3& axis, double angle) {
    const double n = axis.norm();
    if (n < 1e-15) {
      throw Error(ErrorCode::InvalidArgument, "zero rotation axis");
    }
    return Rotation(Eigen::AngleAxisd(angle, axis / n).toRotationMatrix());
  }

  /// Rodrigues exponential of an axis-angle vector.
  static Rotation exp(const Vec3& omega) {
    const double theta2 = omega.squaredNorm();
    const double theta = std::sqrt(theta2);
    const Mat3 w = skew(omega);
    if (theta < 1e-8) {
      return Rotation(Mat3(Mat3::Identity() + w + 0.5 * w * w));
    }
    return Rotation(Mat3(Mat3::Identity() + w * (std::sin(theta) / theta) +
                         w * w * ((1.0 - std::cos(theta)) / theta2)));
  }

  /// Axis-angle logarithm, |result| = rotation angle in [0, pi].
  ///
  /// Three branches: first-order series near zero, the generic sine formula,
  /// and largest-diagonal axis extraction near pi where sin(theta) vanishes.
  Vec3 log() const {
    double cos_theta = 0.5 * (m_.trace() - 1.0);
    cos_theta = std::min(1.0, std::max(-1.0, cos_theta));
    const double theta = std::acos(cos_theta);
    const Vec3 v(m_(2, 1) - m_(1, 2), m_(0, 2) - m_(2, 0), m_(1, 0) - m_(0, 1));
    if (theta < 1e-7) {
      return 0.5 * v;
    }
    if (theta < M_PI - 1e-5) {
      return (0.5 * theta / std::sin(theta)) * v;
    }
    // Angle near pi: R ~ 2aa^T - I, recover the axis from the strongest
    // diagonal entry and fix its sign from the off-diagonal terms.
    int k = 0;
    if (m_(1, 1) > m_(k, k)) k = 1;
    if (m_(2, 2) > m_(k, k)) k = 2;
    const int i = (k + 1) % 3;
    const int j = (k + 2) % 3;
    Vec3 axis;
    axis[k] = std::sqrt(std::max(0.0, (m_(k, k) + 1.0) * 0.5));
    const double denom = 2.0 * axis[k];
    axis[i] = (m_(k, i) + m_(i, k)) / (2.0 * denom);
    axis[j] = (m_(k, j) + m_(j, k)) / (2.0 * denom);
    axis.normalize();
    // Choose the sign consistent with the (possibly tiny) sine part.
    if (axis.dot(v) < 0.0) axis = -axis;
    return theta * axis;
  }

  /// Unit quaternion [w, x, y, z] with w >= 0.
  Quat4 quaternion() const {
    Eigen::Quaterniond q(m_);
    q.normalize();
    if (q.w() < 0.0) {
      q.coeffs() *= -1.0;
    }
    return Quat4(q.w(), q.x(), q.y(), q.z());
  }

  const Mat3& matrix() const { return m_; }

  Vec3 operator*(const Vec3& p) const { return m_ * p; }
  Rotation operator*(const Rotation& o) const { return Rotation(Mat3(m_ * o.m_)); }
  Rotation inverse() const { return Rotation(Mat3(m_.transpose())); }

  double angle_to(const Rotation& o) const {
    return (inverse() * o).log().norm();
  }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

inline Vec3 so3_log(const Rotation& r) { return r.log(); }

/// Angular magnitude of a rotation, radians in [0, pi].
inline double rotation_error(const Rotation& r) { return r.log().norm(); }

/// Euclidean magnitude of a translation, meters.
inline double translation_error(const Vec3& t) { return t.norm(); }

/// The involutive rotation 2aa^T - I: angle pi about the unit axis a.
inline Rotation rotation_pi_about(const Vec3& a) {
  if (std::abs(a.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "rotation_pi_about needs a unit axis");
  }
  return Rotation::from_matrix(Mat3(2.0 * a * a.transpose() - Mat3::Identity()));
}

/// Rigid motion p -> R p + t.
struct RigidTransform {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return RigidTransform{}; }

  static RigidTransform from_parts(const Rotation& r, const Vec3& t) {
    return RigidTransform{r, t};
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  /// this ∘ other (other is applied first).
  RigidTransform compose(const RigidTransform& other) const {
    return RigidTransform{rotation * other.rotation,
                          rotation * other.translation + translation};
  }

  RigidTransform operator*(const RigidTransform& other) const {
    return compose(other);
  }

  RigidTransform inverse() const {
    const Rotation rinv = rotation.inverse();
    return RigidTransform{rinv, -(rinv * translation)};
  }
};

/// Relative rotation angle and translation distance between two transforms.
struct TransformDelta {
  double rotation_angle;
  double translation_distance;
};

inline TransformDelta transform_delta(const RigidTransform& a,
                                      const RigidTransform& b) {
  return TransformDelta{a.rotation.angle_to(b.rotation),
                        (a.translation - b.translation).norm()};
}

/// Infinite 3D line r = anchor + lambda * direction with a unit direction.
///
/// The direction sign is canonicalized (z >= 0, ties broken by y then x) so
/// that the four-way direction ambiguity between two sensors can be
/// enumerated deterministically.
class Line3 {
 public:
  Line3() : anchor_(Vec3::Zero()), direction_(Vec3::UnitZ()) {}

  Line3(const Vec3& anchor, const Vec3& direction) : anchor_(anchor) {
    const double n = direction.norm();
    if (n < 1e-15 || !std::isfinite(n)) {
      throw Error(ErrorCode::InvalidArgument, "line direction must be nonzero");
    }
    direction_ = direction / n;
    canonicalize_sign();
  }

  const Vec3& anchor() const { return anchor_; }
  const Vec3& direction() const { return direction_; }

  Vec3 point_at(double lambda) const { return anchor_ + lambda * direction_; }

  /// Foot-of-perpendicular parameter for a point.
  double project(const Vec3& p) const { return (p - anchor_).dot(direction_); }

 private:
  void canonicalize_sign() {
    const double eps = 1e-12;
    bool flip = false;
    if (direction_.z() < -eps) {
      flip = true;
    } else if (std::abs(direction_.z()) <= eps) {
      if (direction_.y() < -eps) {
        flip = true;
      } else if (std::abs(direction_.y()) <= eps && direction_.x() < 0.0) {
        flip = true;
      }
    }
    if (flip) direction_ = -direction_;
    direction_.normalize();
  }

  Vec3 anchor_;
  Vec3 direction_;
};

/// Orthogonal distance from a point to a line.
inline double point_to_line_distance(const Vec3& p, const Line3& line) {
  const Vec3 d = p - line.anchor();
  return (d - d.dot(line.direction()) * line.direction()).norm();
}

inline Line3 transform_line(const RigidTransform& t, const Line3& line) {
  return Line3(t.apply(line.anchor()), t.rotation * line.direction());
}

}  // namespace polecal

#endif  // POLECAL_GEOMETRY_HPP
