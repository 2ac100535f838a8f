#ifndef POLECAL_SIMULATOR_HPP
#define POLECAL_SIMULATOR_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"
#include "polecal/rng.hpp"

namespace polecal {

/// Spinning-LiDAR beam layout: one scan plane per channel, equal azimuth
/// steps within a plane, additive per-coordinate Gaussian noise.
struct LidarModel {
  std::vector<double> channel_elevations;  // radians, strictly increasing
  double azimuth_resolution = 0.2 * M_PI / 180.0;  // c
  double max_range = 100.0;                        // meters
  double noise_sigma = 0.0;                        // meters, per coordinate

  void validate() const {
    if (!(azimuth_resolution > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "azimuth resolution must be > 0");
    }
    if (!(noise_sigma >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "noise sigma must be >= 0");
    }
    for (std::size_t i = 1; i < channel_elevations.size(); ++i) {
      if (!(channel_elevations[i] > channel_elevations[i - 1])) {
        throw Error(ErrorCode::InvalidArgument,
                    "channel elevations must be strictly increasing");
      }
    }
  }

  /// 16 channels, -15..+15 degrees in 2 degree steps, 0.2 degree azimuth.
  static LidarModel vlp16(double noise_sigma = 0.0) {
    LidarModel m;
    for (int i = 0; i < 16; ++i) {
      m.channel_elevations.push_back((-15.0 + 2.0 * i) * M_PI / 180.0);
    }
    m.noise_sigma = noise_sigma;
    return m;
  }

  /// Single central channel at zero elevation.
  static LidarModel single_plane(double noise_sigma = 0.0) {
    LidarModel m;
    m.channel_elevations.push_back(0.0);
    m.noise_sigma = noise_sigma;
    return m;
  }
};

/// Upright cylindrical calibration pole.
struct PoleSpec {
  Vec3 anchor = Vec3::Zero();      // point on the axis
  Vec3 direction = Vec3::UnitZ();  // unit axis direction
  double radius = 0.02;            // meters
  double z_min = -2.0;             // world-z clip of the physical pole
  double z_max = 2.0;
  bool reflective = true;

  void validate() const {
    if (!(radius > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "pole radius must be > 0");
    }
    if (std::abs(direction.norm() - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidArgument, "pole direction must be unit");
    }
    if (!(z_min < z_max)) {
      throw Error(ErrorCode::InvalidArgument, "pole z extent must be nonempty");
    }
  }

  Line3 axis() const { return Line3(anchor, direction); }
};

/// Pose of one sensor: maps LiDAR-frame coordinates into the world frame.
struct ScenePose {
  RigidTransform lidar_pose;
};

/// Uniform low-intensity background returns shared by both sensors
/// (world-fixed), used by ICP disambiguation and the crispness metric.
struct ClutterSpec {
  std::size_t count = 400;
  Vec3 box_min = Vec3(-4.0, -5.0, -1.0);
  Vec3 box_max = Vec3(5.0, 5.0, 3.0);
};

struct Scenario {
  std::array<ScenePose, 2> lidars;
  std::array<PoleSpec, 2> poles;
  LidarModel model;
  ClutterSpec clutter;
  std::uint64_t rng_seed = 0;

  void validate() const {
    model.validate();
    for (const PoleSpec& p : poles) p.validate();
    if (std::abs(poles[0].direction.dot(poles[1].direction)) >= 1.0 - 1e-6) {
      throw Error(ErrorCode::ParallelPoles,
                  "scenario poles must not be parallel");
    }
  }

  /// Reference extrinsic: LiDAR-2 coordinates into LiDAR-1 coordinates.
  RigidTransform ground_truth() const {
    return lidars[0].lidar_pose.inverse() * lidars[1].lidar_pose;
  }
};

/// Result of moving one (sensor, pole) pair into the canonical pole frame:
/// pole axis on z, sensor on +x at distance `sensor_distance`.
struct CanonicalFrame {
  RigidTransform world_to_canonical;  // composed correction chain
  double sensor_distance = 0.0;       // x_p
  Vec3 scan_plane_normal = Vec3::UnitZ();  // central-plane normal in pole frame
  bool axis_already_vertical = false;      // degenerate-a handled
  bool sensor_behind_x = false;            // degenerate-b handled
};

/// Canonicalization chain: translate the pole anchor to the origin, rotate
/// the axis onto z with the involution built from a = [-nx, -ny, 1-nz],
/// drop the sensor's z offset, then swing the sensor onto +x with the
/// involution built from b = [vx + |v|, vy, vz].
inline CanonicalFrame canonicalize_pole_frame(const RigidTransform& lidar_pose,
                                              const PoleSpec& pole) {
  pole.validate();
  CanonicalFrame out;
  const Vec3& n = pole.direction;

  Rotation axis_to_z;  // A
  const Vec3 a_raw(-n.x(), -n.y(), 1.0 - n.z());
  if (a_raw.norm() < 1e-9) {
    out.axis_already_vertical = true;  // pole already along +z
  } else {
    axis_to_z = rotation_pi_about(a_raw.normalized());
  }

  const RigidTransform recenter{Rotation::identity(), -pole.anchor};
  const RigidTransform align_axis{axis_to_z, Vec3::Zero()};
  const RigidTransform l_star = align_axis * recenter * lidar_pose;

  const Vec3 v_star = l_star.translation;
  const RigidTransform drop_z{Rotation::identity(), Vec3(0.0, 0.0, -v_star.z())};
  const RigidTransform l_mid = drop_z * l_star;
  const Vec3 v = l_mid.translation;
  const double v_norm = v.norm();

  Rotation swing;  // R
  const double off_axis = std::hypot(v.y(), v.z());
  if (off_axis <= 1e-12 * std::max(v_norm, 1.0)) {
    if (v.x() >= 0.0) {
      // Already on +x, nothing to do.
    } else {
      out.sensor_behind_x = true;
      swing = rotation_pi_about(Vec3::UnitZ());
    }
  } else {
    const Vec3 b_raw(v.x() + v_norm, v.y(), v.z());
    swing = rotation_pi_about(b_raw.normalized());
  }

  const RigidTransform align_sensor{swing, Vec3::Zero()};
  out.world_to_canonical = align_sensor * drop_z * align_axis * recenter;
  out.sensor_distance = v_norm;
  const RigidTransform canonical_pose = out.world_to_canonical * lidar_pose;
  out.scan_plane_normal = canonical_pose.rotation * Vec3::UnitZ();
  return out;
}

/// Point of the scan-plane/cylinder intersection curve at angle theta.
/// The plane passes through the sensor position [x_p, 0, 0] with normal v;
/// the cylinder is x^2 + y^2 = r^2 about the z axis.
inline Vec3 cylinder_curve_point(double theta, double x_p, const Vec3& v,
                                 double r) {
  if (std::abs(v.z()) < 1e-9) {
    throw Error(ErrorCode::DegenerateGeometry,
                "scan plane normal has zero z-component");
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double z = -(v.x() * r * c - x_p * v.x() + v.y() * r * s) / v.z();
  return Vec3(r * c, r * s, z);
}

namespace detail {

inline double angle_between(const Vec3& u, const Vec3& w) {
  return std::atan2(u.cross(w).norm(), u.dot(w));
}

}  // namespace detail

/// Marches the beam recurrence along the visible arc: successive samples of
/// the intersection curve subtending exactly the azimuth step c at the
/// sensor. Root of the angle residual is found by bisection + secant polish
/// to 1e-12.
inline std::vector<Vec3> march_beam_points(double x_p, const Vec3& v, double r,
                                           double c) {
  if (!(c > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "azimuth step must be > 0");
  }
  if (!(r < x_p)) {
    throw Error(ErrorCode::DegenerateGeometry,
                "no-visible-arc: sensor inside or on the cylinder (r >= x_p)");
  }
  const double theta_vis = std::acos(r / x_p);
  const Vec3 sensor(x_p, 0.0, 0.0);

  const auto beam = [&](double theta) {
    return Vec3(cylinder_curve_point(theta, x_p, v, r) - sensor);
  };

  std::vector<Vec3> points;
  double theta = -theta_vis;
  points.push_back(cylinder_curve_point(theta, x_p, v, r));

  const double initial_bracket = 4.0 * c * x_p / r;
  const std::size_t max_points = 4 * static_cast<std::size_t>(2.0 * theta_vis / c + 16.0);

  while (points.size() < max_points) {
    const Vec3 u0 = beam(theta);
    const double remaining = theta_vis - theta;
    if (remaining <= 0.0) break;
    const auto residual = [&](double dtheta) {
      return detail::angle_between(u0, beam(theta + dtheta)) - c;
    };
    if (residual(remaining) < 0.0) break;  // rest of the arc subtends < c

    double lo = 0.0;
    double hi = std::min(initial_bracket, remaining);
    while (residual(hi) < 0.0) {
      lo = hi;
      hi = std::min(2.0 * hi, remaining);
    }
    // Bisection until tight, then secant polish on the angle residual.
    double flo = residual(lo);
    for (int iter = 0; iter < 80 && (hi - lo) > 1e-14; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double fmid = residual(mid);
      if (std::abs(fmid) < 1e-13) {
        lo = hi = mid;
        break;
      }
      if ((flo <= 0.0) == (fmid <= 0.0)) {
        lo = mid;
        flo = fmid;
      } else {
        hi = mid;
      }
    }
    double dtheta = 0.5 * (lo + hi);
    for (int iter = 0; iter < 8; ++iter) {
      const double f0 = residual(dtheta);
      if (std::abs(f0) < 1e-12) break;
      const double h = 1e-9;
      const double df = (residual(dtheta + h) - residual(dtheta - h)) / (2.0 * h);
      if (df == 0.0) break;
      const double next = dtheta - f0 / df;
      if (!(next > 0.0) || !(next <= remaining)) break;
      dtheta = next;
    }
    theta += dtheta;
    if (theta > theta_vis) break;
    points.push_back(cylinder_curve_point(theta, x_p, v, r));
  }
  return points;
}

/// Nearest positive-range intersection of a ray with the infinite cylinder
/// x^2 + y^2 = r^2. Independent of the Eq-curve machinery; used as the
/// simulator's cross-check oracle.
inline std::optional<Vec3> raycast_cylinder(const Vec3& origin, const Vec3& dir,
                                            double radius) {
  if (std::abs(dir.norm() - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "ray direction must be unit");
  }
  const double a = dir.x() * dir.x() + dir.y() * dir.y();
  if (a < 1e-30) return std::nullopt;  // ray parallel to the axis
  const double b = origin.x() * dir.x() + origin.y() * dir.y();
  const double cross = origin.x() * dir.y() - origin.y() * dir.x();
  double disc = a * radius * radius - cross * cross;  // Lagrange identity form
  // Tangent rays land within rounding of zero; treat them as grazing hits.
  if (disc < 0.0) {
    if (disc < -1e-12 * a * radius * radius) return std::nullopt;
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  const double s_near = (-b - root) / a;
  const double s_far = (-b + root) / a;
  double s;
  if (s_near > 1e-12) {
    s = s_near;
  } else if (s_far > 1e-12) {
    s = s_far;
  } else {
    return std::nullopt;
  }
  return origin + s * dir;
}

namespace detail {

// RNG stream tags; fixed so that streams are stable across versions.
constexpr std::uint64_t kStreamScenario = 1;
constexpr std::uint64_t kStreamClutterWorld = 2;
constexpr std::uint64_t kStreamPoleNoise = 3;
constexpr std::uint64_t kStreamClutterNoise = 4;

/// Per-channel plane normal: the central plane tilted by the channel
/// elevation about the in-plane axis perpendicular to the pole direction.
inline Vec3 channel_plane_normal(const Vec3& central_normal, double elevation) {
  const Vec3 toward_pole(-1.0, 0.0, 0.0);  // sensor sits on +x in pole frame
  Vec3 in_plane = toward_pole - central_normal.dot(toward_pole) * central_normal;
  const double n = in_plane.norm();
  if (n < 1e-9) {
    throw Error(ErrorCode::DegenerateGeometry,
                "central scan plane is perpendicular to the pole direction");
  }
  in_plane /= n;
  return std::cos(elevation) * central_normal - std::sin(elevation) * in_plane;
}

}  // namespace detail

/// One sensor's noiseless returns from one pole, in the sensor frame,
/// clipped to the pole's world-z extent and the sensor range.
/// `channels` receives the beam channel of each returned point.
inline std::vector<Vec3> simulate_pole_scan(const RigidTransform& lidar_pose,
                                            const PoleSpec& pole,
                                            const LidarModel& model,
                                            std::vector<int>* channels = nullptr) {
  const CanonicalFrame frame = canonicalize_pole_frame(lidar_pose, pole);
  const RigidTransform canonical_to_world = frame.world_to_canonical.inverse();
  const RigidTransform world_to_lidar = lidar_pose.inverse();

  std::vector<Vec3> out;
  for (std::size_t k = 0; k < model.channel_elevations.size(); ++k) {
    Vec3 normal;
    try {
      normal = detail::channel_plane_normal(frame.scan_plane_normal,
                                            model.channel_elevations[k]);
      if (std::abs(normal.z()) < 1e-9) {
        throw Error(ErrorCode::DegenerateGeometry,
                    "channel scan plane parallel to the pole axis");
      }
      const std::vector<Vec3> arc = march_beam_points(
          frame.sensor_distance, normal, pole.radius, model.azimuth_resolution);
      for (const Vec3& p : arc) {
        const Vec3 world = canonical_to_world.apply(p);
        if (world.z() < pole.z_min || world.z() > pole.z_max) continue;
        const Vec3 local = world_to_lidar.apply(world);
        if (local.norm() > model.max_range) continue;
        out.push_back(local);
        if (channels) channels->push_back(static_cast<int>(k));
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateGeometry) {
        throw Error(ErrorCode::DegenerateGeometry,
                    std::string(e.what()) + " (pole at anchor [" +
                        std::to_string(pole.anchor.x()) + ", " +
                        std::to_string(pole.anchor.y()) + ", " +
                        std::to_string(pole.anchor.z()) + "])");
      }
      throw;
    }
  }
  return out;
}

/// Scan plus per-point provenance: which pole produced each return
/// (-1 = clutter). Used by extraction tests against known labels.
struct LabeledScan {
  PointCloud cloud;
  std::vector<int> source_pole;
};

inline LabeledScan generate_scan_labeled(const Scenario& scenario,
                                         std::size_t lidar_index) {
  if (lidar_index >= 2) {
    throw Error(ErrorCode::InvalidArgument, "lidar index must be 0 or 1");
  }
  scenario.validate();
  const RigidTransform& pose = scenario.lidars[lidar_index].lidar_pose;
  const double sigma = scenario.model.noise_sigma;

  LabeledScan out;
  for (std::size_t pole_idx = 0; pole_idx < 2; ++pole_idx) {
    const PoleSpec& pole = scenario.poles[pole_idx];
    std::vector<int> channels;
    std::vector<Vec3> pts;
    try {
      pts = simulate_pole_scan(pose, pole, scenario.model, &channels);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::DegenerateGeometry) {
        throw Error(ErrorCode::DegenerateGeometry,
                    "pole " + std::to_string(pole_idx) + ": " + e.what());
      }
      throw;
    }
    // Per-channel noise streams keep parallel and serial generation identical.
    std::vector<Rng> noise;
    noise.reserve(scenario.model.channel_elevations.size());
    for (std::size_t k = 0; k < scenario.model.channel_elevations.size(); ++k) {
      noise.push_back(Rng::split(scenario.rng_seed,
                                 {detail::kStreamPoleNoise, lidar_index, pole_idx, k}));
    }
    const double intensity = pole.reflective ? 255.0 : 50.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      Vec3 p = pts[i];
      if (sigma > 0.0) {
        Rng& rng = noise[static_cast<std::size_t>(channels[i])];
        p += Vec3(rng.normal(0.0, sigma), rng.normal(0.0, sigma),
                  rng.normal(0.0, sigma));
      }
      out.cloud.push_back(p, intensity, channels[i]);
      out.source_pole.push_back(static_cast<int>(pole_idx));
    }
  }

  if (scenario.clutter.count > 0) {
    // World-fixed clutter: positions and intensities are shared by both
    // sensors (same stream), only the measurement noise is per sensor.
    Rng world = Rng::split(scenario.rng_seed, {detail::kStreamClutterWorld});
    Rng meas = Rng::split(scenario.rng_seed,
                          {detail::kStreamClutterNoise, lidar_index});
    const RigidTransform world_to_lidar = pose.inverse();
    const Vec3& lo = scenario.clutter.box_min;
    const Vec3& hi = scenario.clutter.box_max;
    for (std::size_t i = 0; i < scenario.clutter.count; ++i) {
      const Vec3 world_pt(world.uniform(lo.x(), hi.x()),
                          world.uniform(lo.y(), hi.y()),
                          world.uniform(lo.z(), hi.z()));
      const double intensity = world.uniform(0.0, 100.0);
      Vec3 local = world_to_lidar.apply(world_pt);
      if (local.norm() > scenario.model.max_range) continue;
      if (sigma > 0.0) {
        local += Vec3(meas.normal(0.0, sigma), meas.normal(0.0, sigma),
                      meas.normal(0.0, sigma));
      }
      out.cloud.push_back(local, intensity, -1);
      out.source_pole.push_back(-1);
    }
  }
  return out;
}

/// Synthetic scan of the whole scenario as seen by one sensor.
inline PointCloud generate_scan(const Scenario& scenario, std::size_t lidar_index) {
  return generate_scan_labeled(scenario, lidar_index).cloud;
}

/// Reference sensor poses used throughout the randomized experiments.
inline std::array<ScenePose, 2> reference_lidar_rig() {
  std::array<ScenePose, 2> rig;
  rig[0].lidar_pose = RigidTransform{
      Rotation::from_quaternion(0.988, 0.094, 0.079, 0.094), Vec3(1.0, -1.0, 0.0)};
  rig[1].lidar_pose = RigidTransform{
      Rotation::from_quaternion(0.989, -0.079, -0.094, -0.079), Vec3(1.0, 1.0, 0.0)};
  return rig;
}

/// Reference sensor orientations for the single-pole accuracy sweeps.
inline Rotation reference_orientation_q1() {
  return Rotation::from_quaternion(0.957, -0.120, 0.263, -0.013);
}
inline Rotation reference_orientation_q2() {
  return Rotation::from_quaternion(1.0, 0.0, 0.0, 0.0);
}

/// Randomized two-pole scenario: fixed sensor rig, near-vertical pole
/// directions (z-component > 0.9) at least 10 degrees apart, anchors on the
/// world y-axis with the first anchor norm in [2, 3] and inter-anchor
/// distance in [1.5, 4]. Deterministic in the seed.
inline Scenario random_scenario(std::uint64_t seed, double noise_sigma = 0.006,
                                std::size_t clutter_count = 400) {
  Rng rng = Rng::split(seed, {detail::kStreamScenario});
  Scenario s;
  s.rng_seed = seed;
  s.lidars = reference_lidar_rig();
  s.model = LidarModel::vlp16(noise_sigma);
  s.clutter.count = clutter_count;

  const auto sample_direction = [&]() {
    const double z = rng.uniform(0.9, 1.0);
    const double az = rng.uniform(0.0, 2.0 * M_PI);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(rho * std::cos(az), rho * std::sin(az), z);
  };

  Vec3 dir_a = sample_direction();
  Vec3 dir_b = sample_direction();
  // Non-parallel with margin: keeps the rotation well observable.
  const double max_dot = std::cos(10.0 * M_PI / 180.0);
  while (dir_a.dot(dir_b) > max_dot) {
    dir_b = sample_direction();
  }

  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double y_a = sign * rng.uniform(2.0, 3.0);
  const double separation = rng.uniform(1.5, 4.0);
  const double y_b = y_a - sign * separation;

  s.poles[0] = PoleSpec{Vec3(0.0, y_a, 0.0), dir_a, 0.02, -2.0, 2.0, true};
  s.poles[1] = PoleSpec{Vec3(0.0, y_b, 0.0), dir_b, 0.02, -2.0, 2.0, true};
  s.validate();
  return s;
}

}  // namespace polecal

#endif  // POLECAL_SIMULATOR_HPP
