#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <Eigen/Dense>

#include "polecal/geometry.hpp"
#include "polecal/rng.hpp"

using namespace polecal;

namespace {

Vec3 random_unit(Rng& rng) {
  while (true) {
    const Vec3 v(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                 rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 0.1 && n < 1.0) return v / n;
  }
}

Rotation random_rotation(Rng& rng) {
  return Rotation::from_axis_angle(random_unit(rng), rng.uniform(-M_PI, M_PI));
}

// Textbook quaternion-to-matrix expansion, written out independently.
Mat3 quat_matrix_oracle(double w, double x, double y, double z) {
  Mat3 m;
  m << w * w + x * x - y * y - z * z, 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), w * w - x * x + y * y - z * z, 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), w * w - x * x - y * y + z * z;
  return m;
}

}  // namespace

TEST_CASE("skew matrix reproduces the cross product") {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const Vec3 a = random_unit(rng) * rng.uniform(0.1, 5.0);
    const Vec3 b = random_unit(rng) * rng.uniform(0.1, 5.0);
    REQUIRE((skew(a) * b - a.cross(b)).norm() < 1e-14);
  }
}

TEST_CASE("rotation from unit quaternion matches the expanded matrix") {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    double w = rng.uniform(-1.0, 1.0), x = rng.uniform(-1.0, 1.0);
    double y = rng.uniform(-1.0, 1.0), z = rng.uniform(-1.0, 1.0);
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (n < 0.1) continue;
    w /= n; x /= n; y /= n; z /= n;
    const Rotation r = Rotation::from_quaternion(w, x, y, z);
    REQUIRE((r.matrix() - quat_matrix_oracle(w, x, y, z)).cwiseAbs().maxCoeff() <
            1e-12);
  }
}

TEST_CASE("quaternion accessor round-trips with non-negative w") {
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Rotation r = random_rotation(rng);
    const Quat4 q = r.quaternion();
    REQUIRE(q[0] >= 0.0);
    REQUIRE(std::abs(q.norm() - 1.0) < 1e-12);
    const Rotation back = Rotation::from_quaternion(q);
    REQUIRE(r.angle_to(back) < 1e-12);
  }
}

TEST_CASE("quaternion constructor normalizes and rejects degenerate input") {
  const Rotation a = Rotation::from_quaternion(2.0, 0.0, 0.0, 0.0);
  REQUIRE((a.matrix() - Mat3::Identity()).norm() < 1e-15);
  REQUIRE_THROWS_AS(Rotation::from_quaternion(0.0, 0.0, 0.0, 0.0), Error);
  REQUIRE_THROWS_AS(
      Rotation::from_quaternion(std::numeric_limits<double>::quiet_NaN(), 0, 0, 1),
      Error);
}

TEST_CASE("from_matrix validates orthonormality and handedness") {
  Mat3 m = Mat3::Identity();
  REQUIRE_NOTHROW(Rotation::from_matrix(m));
  m(0, 0) = 1.01;
  REQUIRE_THROWS_AS(Rotation::from_matrix(m), Error);
  Mat3 reflect = Mat3::Identity();
  reflect(2, 2) = -1.0;  // orthonormal but det = -1
  REQUIRE_THROWS_AS(Rotation::from_matrix(reflect), Error);
}

TEST_CASE("exp and log invert each other across the angle range") {
  Rng rng(17);
  for (double angle : {1e-12, 1e-9, 1e-7, 0.5, 2.0, 3.0, M_PI - 1e-6, M_PI - 1e-9}) {
    for (int i = 0; i < 8; ++i) {
      const Vec3 w = random_unit(rng) * angle;
      const Vec3 back = Rotation::exp(w).log();
      // Near pi the axis sign can flip; both signs name the same rotation.
      const double err = std::min((back - w).norm(), (back + w).norm());
      REQUIRE(err < 1e-8);
      REQUIRE(std::abs(back.norm() - angle) < 1e-9);
    }
  }
}

TEST_CASE("log of an exact half-turn recovers the axis") {
  Rng rng(19);
  for (int i = 0; i < 20; ++i) {
    const Vec3 axis = random_unit(rng);
    const Vec3 w = rotation_pi_about(axis).log();
    REQUIRE(std::abs(w.norm() - M_PI) < 1e-9);
    REQUIRE(std::min((w / M_PI - axis).norm(), (w / M_PI + axis).norm()) < 1e-7);
  }
}

TEST_CASE("log magnitude equals the trace angle formula") {
  Rng rng(23);
  for (int i = 0; i < 40; ++i) {
    const Rotation r = random_rotation(rng);
    const double trace_angle =
        std::acos(std::clamp(0.5 * (r.matrix().trace() - 1.0), -1.0, 1.0));
    REQUIRE(std::abs(r.log().norm() - trace_angle) < 1e-9);
  }
}

TEST_CASE("exp of the log restores the matrix") {
  Rng rng(29);
  for (int i = 0; i < 40; ++i) {
    const Rotation r = random_rotation(rng);
    REQUIRE((Rotation::exp(r.log()).matrix() - r.matrix()).cwiseAbs().maxCoeff() <
            1e-12);
  }
}

TEST_CASE("angle_to agrees with the relative rotation magnitude") {
  Rng rng(31);
  for (int i = 0; i < 30; ++i) {
    const Rotation a = random_rotation(rng);
    const Rotation b = random_rotation(rng);
    const Mat3 rel = a.matrix().transpose() * b.matrix();
    const double oracle =
        std::acos(std::clamp(0.5 * (rel.trace() - 1.0), -1.0, 1.0));
    REQUIRE(std::abs(a.angle_to(b) - oracle) < 1e-9);
  }
  const Rotation r = random_rotation(rng);
  REQUIRE(r.angle_to(r) < 1e-12);
}

TEST_CASE("half-turn builder is involutive and fixes its axis") {
  Rng rng(37);
  for (int i = 0; i < 20; ++i) {
    const Vec3 a = random_unit(rng);
    const Rotation h = rotation_pi_about(a);
    REQUIRE((h * a - a).norm() < 1e-12);
    REQUIRE(((h * h).matrix() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    // Any vector perpendicular to the axis is negated.
    const Vec3 perp = a.unitOrthogonal();
    REQUIRE((h * perp + perp).norm() < 1e-12);
  }
  REQUIRE_THROWS_AS(rotation_pi_about(Vec3(0.0, 0.0, 2.0)), Error);
}

TEST_CASE("rigid transforms compose like homogeneous matrices") {
  Rng rng(41);
  const auto homogeneous = [](const RigidTransform& t) {
    Eigen::Matrix4d h = Eigen::Matrix4d::Identity();
    h.topLeftCorner<3, 3>() = t.rotation.matrix();
    h.topRightCorner<3, 1>() = t.translation;
    return h;
  };
  for (int i = 0; i < 30; ++i) {
    const RigidTransform a{random_rotation(rng), random_unit(rng) * 3.0};
    const RigidTransform b{random_rotation(rng), random_unit(rng) * 3.0};
    const Eigen::Matrix4d oracle = homogeneous(a) * homogeneous(b);
    REQUIRE((homogeneous(a * b) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE((homogeneous(a.inverse()) - homogeneous(a).inverse())
                .cwiseAbs()
                .maxCoeff() < 1e-12);

    const Vec3 p = random_unit(rng) * 2.0;
    REQUIRE((a.apply(b.apply(p)) - (a * b).apply(p)).norm() < 1e-12);
    REQUIRE((a.inverse().apply(a.apply(p)) - p).norm() < 1e-12);
  }
}

TEST_CASE("transform_delta measures relative rotation and translation") {
  Rng rng(43);
  const RigidTransform a{random_rotation(rng), Vec3(1.0, 2.0, 3.0)};
  const RigidTransform b{a.rotation * Rotation::from_axis_angle(Vec3::UnitX(), 0.25),
                         Vec3(1.0, 2.0, 3.5)};
  const TransformDelta d = transform_delta(a, b);
  REQUIRE(std::abs(d.rotation_angle - 0.25) < 1e-12);
  REQUIRE(std::abs(d.translation_distance - 0.5) < 1e-12);
  const TransformDelta flipped = transform_delta(b, a);
  REQUIRE(std::abs(flipped.rotation_angle - d.rotation_angle) < 1e-12);
  REQUIRE(std::abs(flipped.translation_distance - d.translation_distance) < 1e-12);
}

TEST_CASE("line direction is unit and sign-canonical") {
  const Line3 down(Vec3(1.0, 2.0, 3.0), Vec3(0.0, 0.0, -4.0));
  REQUIRE(down.direction().z() == 1.0);

  const Line3 y_neg(Vec3::Zero(), Vec3(1.0, -2.0, 0.0));
  REQUIRE(y_neg.direction().y() > 0.0);  // z tie broken by y

  const Line3 x_neg(Vec3::Zero(), Vec3(-5.0, 0.0, 0.0));
  REQUIRE(x_neg.direction().x() == 1.0);  // z and y ties broken by x

  Rng rng(47);
  for (int i = 0; i < 20; ++i) {
    const Line3 l(random_unit(rng) * 3.0, random_unit(rng));
    REQUIRE(std::abs(l.direction().norm() - 1.0) < 1e-13);
    REQUIRE(l.direction().z() >= -1e-12);
  }
  REQUIRE_THROWS_AS(Line3(Vec3::Zero(), Vec3::Zero()), Error);
}

TEST_CASE("line projection gives the closest point") {
  Rng rng(53);
  for (int i = 0; i < 20; ++i) {
    const Line3 l(random_unit(rng) * 2.0, random_unit(rng));
    const Vec3 p = random_unit(rng) * 4.0;
    const double lam = l.project(p);
    const double best = (p - l.point_at(lam)).norm();
    // Any other parameter is farther away.
    for (double off : {-1.0, -0.1, 0.1, 1.0}) {
      REQUIRE(best <= (p - l.point_at(lam + off)).norm() + 1e-12);
    }
    // Cross-product distance formula as the oracle.
    const double oracle = (p - l.anchor()).cross(l.direction()).norm();
    REQUIRE(std::abs(point_to_line_distance(p, l) - oracle) < 1e-12);
    REQUIRE(std::abs(best - oracle) < 1e-12);
  }
}

TEST_CASE("rigid transforms preserve point-line distance") {
  Rng rng(59);
  for (int i = 0; i < 20; ++i) {
    const Line3 l(random_unit(rng) * 2.0, random_unit(rng));
    const Vec3 p = random_unit(rng) * 4.0;
    const RigidTransform t{random_rotation(rng), random_unit(rng) * 3.0};
    const double before = point_to_line_distance(p, l);
    const double after = point_to_line_distance(t.apply(p), transform_line(t, l));
    REQUIRE(std::abs(before - after) < 1e-12);
  }
}
