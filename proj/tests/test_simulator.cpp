#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "polecal/simulator.hpp"

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

RigidTransform random_pose(Rng& rng) {
  return RigidTransform{
      Rotation::from_axis_angle(random_unit(rng), rng.uniform(-M_PI, M_PI)),
      Vec3(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(-1, 1))};
}

PoleSpec random_pole(Rng& rng) {
  PoleSpec pole;
  pole.anchor = Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1));
  Vec3 d = random_unit(rng);
  if (d.z() < 0.0) d = -d;
  d = (d + Vec3(0, 0, 2)).normalized();  // keep it pole-like (near vertical)
  pole.direction = d;
  pole.radius = rng.uniform(0.01, 0.3);
  return pole;
}

}  // namespace

TEST_CASE("lidar model validation") {
  LidarModel bad = LidarModel::vlp16();
  bad.azimuth_resolution = 0.0;
  REQUIRE_THROWS_AS(bad.validate(), Error);

  LidarModel unsorted = LidarModel::vlp16();
  std::swap(unsorted.channel_elevations[0], unsorted.channel_elevations[1]);
  REQUIRE_THROWS_AS(unsorted.validate(), Error);

  REQUIRE(LidarModel::vlp16().channel_elevations.size() == 16);
  REQUIRE(LidarModel::single_plane().channel_elevations.size() == 1);
  REQUIRE_NOTHROW(LidarModel::vlp16().validate());
}

TEST_CASE("pole spec validation") {
  PoleSpec p;
  REQUIRE_NOTHROW(p.validate());
  p.radius = 0.0;
  REQUIRE_THROWS_AS(p.validate(), Error);
  p.radius = 0.02;
  p.direction = Vec3(0, 0, 2);
  REQUIRE_THROWS_AS(p.validate(), Error);
  p.direction = Vec3::UnitZ();
  p.z_min = 1.0;
  p.z_max = 1.0;
  REQUIRE_THROWS_AS(p.validate(), Error);
}

TEST_CASE("canonical frame puts the sensor on +x and the pole on z") {
  Rng rng(101);
  for (int trial = 0; trial < 40; ++trial) {
    const RigidTransform pose = random_pose(rng);
    const PoleSpec pole = random_pole(rng);
    const CanonicalFrame frame = canonicalize_pole_frame(pose, pole);

    const Vec3 sensor = frame.world_to_canonical.apply(pose.translation);
    REQUIRE(std::abs(sensor.x() - frame.sensor_distance) < 1e-9);
    REQUIRE(std::abs(sensor.y()) < 1e-9);
    REQUIRE(std::abs(sensor.z()) < 1e-9);
    REQUIRE(frame.sensor_distance >= 0.0);

    // The pole's axis lands on the z-axis.
    const Vec3 anchor_c = frame.world_to_canonical.apply(pole.anchor);
    REQUIRE(std::abs(anchor_c.x()) < 1e-9);
    REQUIRE(std::abs(anchor_c.y()) < 1e-9);
    const Vec3 dir_c = frame.world_to_canonical.rotation * pole.direction;
    REQUIRE(std::abs(std::abs(dir_c.z()) - 1.0) < 1e-9);

    // Rigid: distances survive the trip.
    const Vec3 a = random_unit(rng) * 2.0;
    const Vec3 b = random_unit(rng) * 2.0;
    REQUIRE(std::abs((frame.world_to_canonical.apply(a) -
                      frame.world_to_canonical.apply(b))
                         .norm() -
                     (a - b).norm()) < 1e-12);
  }
}

TEST_CASE("canonical frame handles the aligned special cases") {
  PoleSpec vertical;
  vertical.anchor = Vec3(0, 0, 0);
  vertical.direction = Vec3::UnitZ();

  RigidTransform pose;
  pose.translation = Vec3(3.0, 0.0, 0.5);
  const CanonicalFrame plain = canonicalize_pole_frame(pose, vertical);
  REQUIRE(plain.axis_already_vertical);
  REQUIRE_FALSE(plain.sensor_behind_x);
  REQUIRE(std::abs(plain.sensor_distance - 3.0) < 1e-12);

  pose.translation = Vec3(-2.5, 0.0, 0.0);
  const CanonicalFrame behind = canonicalize_pole_frame(pose, vertical);
  REQUIRE(behind.sensor_behind_x);
  REQUIRE(std::abs(behind.sensor_distance - 2.5) < 1e-12);
  const Vec3 sensor = behind.world_to_canonical.apply(pose.translation);
  REQUIRE((sensor - Vec3(2.5, 0.0, 0.0)).norm() < 1e-12);
}

TEST_CASE("curve points lie on the cylinder and the scan plane") {
  Rng rng(103);
  for (int trial = 0; trial < 30; ++trial) {
    const double x_p = rng.uniform(2.0, 12.0);
    const double r = rng.uniform(0.01, 0.4);
    Vec3 v = random_unit(rng);
    if (std::abs(v.z()) < 0.2) v.z() = 0.5;
    v.normalize();
    const double theta = rng.uniform(-1.2, 1.2);

    const Vec3 p = cylinder_curve_point(theta, x_p, v, r);
    REQUIRE(std::abs(std::hypot(p.x(), p.y()) - r) < 1e-12);
    // Plane through the sensor [x_p, 0, 0] with normal v.
    REQUIRE(std::abs((p - Vec3(x_p, 0, 0)).dot(v)) < 1e-9);
  }
  REQUIRE_THROWS_AS(cylinder_curve_point(0.0, 5.0, Vec3(1, 0, 0), 0.1), Error);
}

TEST_CASE("marched beams subtend exactly the azimuth step") {
  Rng rng(107);
  for (int trial = 0; trial < 10; ++trial) {
    const double x_p = rng.uniform(3.0, 10.0);
    const double r = rng.uniform(0.05, 0.3);
    const double c = 0.2 * M_PI / 180.0;
    Vec3 v(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), 1.0);
    v.normalize();

    const std::vector<Vec3> pts = march_beam_points(x_p, v, r, c);
    REQUIRE(pts.size() >= 2);
    const Vec3 sensor(x_p, 0, 0);
    const double theta_vis = std::acos(r / x_p);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      REQUIRE(std::abs(std::hypot(pts[i].x(), pts[i].y()) - r) < 1e-12);
      REQUIRE(std::abs((pts[i] - sensor).dot(v)) < 1e-9);
      const double theta = std::atan2(pts[i].y(), pts[i].x());
      REQUIRE(std::abs(theta) <= theta_vis + 1e-12);
      if (i > 0) {
        const Vec3 u0 = pts[i - 1] - sensor;
        const Vec3 u1 = pts[i] - sensor;
        const double angle = std::atan2(u0.cross(u1).norm(), u0.dot(u1));
        REQUIRE(std::abs(angle - c) < 1e-9);
      }
    }
    // First sample starts at the visibility edge.
    REQUIRE(std::abs(std::atan2(pts[0].y(), pts[0].x()) + theta_vis) < 1e-12);
  }

  REQUIRE_THROWS_AS(march_beam_points(0.1, Vec3(0, 0, 1), 0.2, 0.001), Error);
  REQUIRE_THROWS_AS(march_beam_points(5.0, Vec3(0, 0, 1), 0.2, 0.0), Error);
}

TEST_CASE("raycast returns the nearest cylinder hit") {
  // Straight shot down -x at a radius-1 cylinder from (5, 0, 0).
  const auto hit = raycast_cylinder(Vec3(5, 0, 0), Vec3(-1, 0, 0), 1.0);
  REQUIRE(hit.has_value());
  REQUIRE((*hit - Vec3(1, 0, 0)).norm() < 1e-12);

  // From inside, the ray exits through the far wall.
  const auto exit_hit = raycast_cylinder(Vec3(0, 0, 0), Vec3(1, 0, 0), 1.0);
  REQUIRE(exit_hit.has_value());
  REQUIRE((*exit_hit - Vec3(1, 0, 0)).norm() < 1e-12);

  // Pointing away misses.
  REQUIRE_FALSE(raycast_cylinder(Vec3(5, 0, 0), Vec3(1, 0, 0), 1.0).has_value());
  // Parallel to the axis misses.
  REQUIRE_FALSE(raycast_cylinder(Vec3(5, 0, 0), Vec3(0, 0, 1), 1.0).has_value());
  // Offset larger than the radius misses.
  REQUIRE_FALSE(raycast_cylinder(Vec3(5, 3, 0), Vec3(-1, 0, 0), 1.0).has_value());
  // Non-unit directions are rejected.
  REQUIRE_THROWS_AS(raycast_cylinder(Vec3(5, 0, 0), Vec3(-2, 0, 0), 1.0), Error);

  Rng rng(109);
  for (int i = 0; i < 50; ++i) {
    const Vec3 origin(rng.uniform(2, 8), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3 target(0.0, rng.uniform(-0.05, 0.05), rng.uniform(-1, 1));
    const Vec3 dir = (target - origin).normalized();
    const auto p = raycast_cylinder(origin, dir, 0.1);
    REQUIRE(p.has_value());
    REQUIRE(std::abs(std::hypot(p->x(), p->y()) - 0.1) < 1e-9);
    // On the ray, in front of the origin, and on the near side.
    const double s = (*p - origin).dot(dir);
    REQUIRE(s > 0.0);
    REQUIRE(((origin + s * dir) - *p).norm() < 1e-9);
    REQUIRE(s < (target - origin).norm());
  }
}

TEST_CASE("marching agrees with the independent ray cast") {
  Rng rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const double x_p = rng.uniform(3.0, 10.0);
    const double r = rng.uniform(0.02, 0.3);
    Vec3 v(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), 1.0);
    v.normalize();
    const Vec3 sensor(x_p, 0, 0);

    const std::vector<Vec3> pts =
        march_beam_points(x_p, v, r, 0.2 * M_PI / 180.0);
    for (const Vec3& p : pts) {
      const Vec3 dir = (p - sensor).normalized();
      const auto cast = raycast_cylinder(sensor, dir, r);
      REQUIRE(cast.has_value());
      REQUIRE((*cast - p).norm() < 1e-9);
    }
  }
}

TEST_CASE("pole scan returns sit on the pole surface") {
  Rng rng(127);
  for (int trial = 0; trial < 10; ++trial) {
    const RigidTransform pose = random_pose(rng);
    const PoleSpec pole = random_pole(rng);
    std::vector<int> channels;
    std::vector<Vec3> pts;
    try {
      pts = simulate_pole_scan(pose, pole, LidarModel::vlp16(), &channels);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateGeometry) continue;
      throw;
    }
    REQUIRE(channels.size() == pts.size());
    const Line3 axis = pole.axis();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 world = pose.apply(pts[i]);
      REQUIRE(std::abs(point_to_line_distance(world, axis) - pole.radius) < 1e-9);
      REQUIRE(world.z() >= pole.z_min - 1e-12);
      REQUIRE(world.z() <= pole.z_max + 1e-12);
      REQUIRE(channels[i] >= 0);
      REQUIRE(channels[i] < 16);
    }
  }
}

TEST_CASE("max range drops far returns") {
  PoleSpec pole;
  pole.anchor = Vec3(0, 0, 0);
  pole.direction = Vec3::UnitZ();
  RigidTransform pose;
  pose.translation = Vec3(9.0, 0.0, 0.0);

  LidarModel model = LidarModel::single_plane();
  REQUIRE_FALSE(simulate_pole_scan(pose, pole, model).empty());
  model.max_range = 5.0;
  REQUIRE(simulate_pole_scan(pose, pole, model).empty());
}

TEST_CASE("labeled scan partitions points by source") {
  const Scenario s = random_scenario(5, 0.0, 50);
  const LabeledScan scan = generate_scan_labeled(s, 0);
  REQUIRE(scan.cloud.size() == scan.source_pole.size());
  REQUIRE(scan.cloud.has_ring());

  std::size_t pole_points = 0;
  for (std::size_t i = 0; i < scan.cloud.size(); ++i) {
    const int label = scan.source_pole[i];
    if (label >= 0) {
      ++pole_points;
      REQUIRE(scan.cloud.intensities[i] == 255.0);
      REQUIRE(scan.cloud.ring[i] >= 0);
      // On the labeled pole's surface, in world coordinates.
      const Vec3 world = s.lidars[0].lidar_pose.apply(scan.cloud.points[i]);
      const double d = point_to_line_distance(
          world, s.poles[static_cast<std::size_t>(label)].axis());
      REQUIRE(std::abs(d - 0.02) < 1e-9);
    } else {
      REQUIRE(scan.cloud.intensities[i] < 200.0);
      REQUIRE(scan.cloud.ring[i] == -1);
    }
  }
  REQUIRE(pole_points > 50);
  REQUIRE(scan.cloud.size() > pole_points);  // clutter present

  REQUIRE_THROWS_AS(generate_scan_labeled(s, 2), Error);
}

TEST_CASE("clutter is world-fixed across the two sensors") {
  const Scenario s = random_scenario(8, 0.0, 120);
  const LabeledScan a = generate_scan_labeled(s, 0);
  const LabeledScan b = generate_scan_labeled(s, 1);

  std::vector<Vec3> world_a, world_b;
  for (std::size_t i = 0; i < a.cloud.size(); ++i) {
    if (a.source_pole[i] == -1) {
      world_a.push_back(s.lidars[0].lidar_pose.apply(a.cloud.points[i]));
    }
  }
  for (std::size_t i = 0; i < b.cloud.size(); ++i) {
    if (b.source_pole[i] == -1) {
      world_b.push_back(s.lidars[1].lidar_pose.apply(b.cloud.points[i]));
    }
  }
  REQUIRE(world_a.size() == world_b.size());
  REQUIRE(world_a.size() == 120);
  for (std::size_t i = 0; i < world_a.size(); ++i) {
    REQUIRE((world_a[i] - world_b[i]).norm() < 1e-9);
  }
}

TEST_CASE("scan generation is deterministic in the seed") {
  const Scenario s = random_scenario(21, 0.006, 60);
  const PointCloud a = generate_scan(s, 0);
  const PointCloud b = generate_scan(s, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.points[i] == b.points[i]);
    REQUIRE(a.intensities[i] == b.intensities[i]);
  }

  Scenario other = s;
  other.rng_seed = 22;
  const PointCloud c = generate_scan(other, 0);
  bool differ = c.size() != a.size();
  for (std::size_t i = 0; !differ && i < std::min(a.size(), c.size()); ++i) {
    differ = a.points[i] != c.points[i];
  }
  REQUIRE(differ);
}

TEST_CASE("noise perturbs pole returns at the configured scale") {
  Scenario s = random_scenario(31, 0.0, 0);
  const PointCloud clean = generate_scan(s, 0);
  s.model.noise_sigma = 0.006;
  const PointCloud noisy = generate_scan(s, 0);
  REQUIRE(clean.size() == noisy.size());
  double max_shift = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double d = (clean.points[i] - noisy.points[i]).norm();
    max_shift = std::max(max_shift, d);
    sq += d * d;
  }
  const double rms = std::sqrt(sq / static_cast<double>(clean.size()));
  REQUIRE(max_shift > 0.0);
  REQUIRE(rms > 0.003);  // about sigma * sqrt(3)
  REQUIRE(rms < 0.03);
}

TEST_CASE("scenario ground truth is the relative sensor pose") {
  const Scenario s = random_scenario(3);
  const RigidTransform gt = s.ground_truth();
  const RigidTransform oracle =
      s.lidars[0].lidar_pose.inverse() * s.lidars[1].lidar_pose;
  REQUIRE(gt.rotation.angle_to(oracle.rotation) < 1e-12);
  REQUIRE((gt.translation - oracle.translation).norm() < 1e-12);

  // A point seen by sensor 2 maps into sensor 1's frame through it.
  const Vec3 world(0.3, 1.2, 0.4);
  const Vec3 in_l2 = s.lidars[1].lidar_pose.inverse().apply(world);
  const Vec3 in_l1 = s.lidars[0].lidar_pose.inverse().apply(world);
  REQUIRE((gt.apply(in_l2) - in_l1).norm() < 1e-12);
}

TEST_CASE("random scenarios satisfy the documented constraints") {
  std::set<double> seen_y;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Scenario s = random_scenario(seed);
    REQUIRE_NOTHROW(s.validate());
    REQUIRE(s.poles[0].direction.z() > 0.9);
    REQUIRE(s.poles[1].direction.z() > 0.9);
    REQUIRE(s.poles[0].direction.dot(s.poles[1].direction) <
            std::cos(10.0 * M_PI / 180.0));
    REQUIRE(s.poles[0].anchor.x() == 0.0);
    REQUIRE(s.poles[1].anchor.x() == 0.0);
    const double y_a = std::abs(s.poles[0].anchor.y());
    REQUIRE(y_a >= 2.0);
    REQUIRE(y_a <= 3.0);
    const double gap = std::abs(s.poles[0].anchor.y() - s.poles[1].anchor.y());
    REQUIRE(gap >= 1.5);
    REQUIRE(gap <= 4.0);
    REQUIRE(s.poles[0].radius == 0.02);
    seen_y.insert(s.poles[0].anchor.y());
  }
  REQUIRE(seen_y.size() > 20);  // the seed actually drives the draw

  const Scenario a = random_scenario(77);
  const Scenario b = random_scenario(77);
  REQUIRE(a.poles[0].anchor == b.poles[0].anchor);
  REQUIRE(a.poles[1].direction == b.poles[1].direction);
}

TEST_CASE("parallel poles are rejected at validation") {
  Scenario s = random_scenario(4);
  s.poles[1].direction = s.poles[0].direction;
  REQUIRE_THROWS_AS(s.validate(), Error);
  try {
    s.validate();
  } catch (const Error& e) {
    REQUIRE(e.code() == ErrorCode::ParallelPoles);
  }
}
