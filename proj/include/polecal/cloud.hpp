#ifndef POLECAL_CLOUD_HPP
#define POLECAL_CLOUD_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "polecal/error.hpp"
#include "polecal/geometry.hpp"

namespace polecal {

/// 3D points with per-point intensity in [0, 255] and an optional per-point
/// beam channel index (ring). Arrays are parallel; `ring` is either empty or
/// the same length as `points` (-1 marks returns with no channel, e.g.
/// environment clutter).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<double> intensities;
  std::vector<int> ring;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_ring() const { return !ring.empty(); }

  void reserve(std::size_t n) {
    points.reserve(n);
    intensities.reserve(n);
  }

  void push_back(const Vec3& p, double intensity, int channel = -1) {
    points.push_back(p);
    intensities.push_back(intensity);
    ring.push_back(channel);
  }

  /// Throws on parallel-array mismatch, NaN/Inf coordinates, or out-of-range
  /// intensity.
  void validate() const {
    if (intensities.size() != points.size() ||
        (!ring.empty() && ring.size() != points.size())) {
      throw Error(ErrorCode::InvalidArgument, "parallel arrays differ in length");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!points[i].allFinite()) {
        throw Error(ErrorCode::InvalidArgument,
                    "non-finite point at index " + std::to_string(i));
      }
      if (!(intensities[i] >= 0.0 && intensities[i] <= 255.0)) {
        throw Error(ErrorCode::InvalidArgument,
                    "intensity out of [0,255] at index " + std::to_string(i));
      }
    }
  }
};

inline PointCloud transform_cloud(const RigidTransform& t, const PointCloud& in) {
  PointCloud out;
  out.points.reserve(in.size());
  out.intensities = in.intensities;
  out.ring = in.ring;
  for (const Vec3& p : in.points) {
    out.points.push_back(t.apply(p));
  }
  return out;
}

/// Deterministic stride subsample down to at most `max_points`.
inline PointCloud subsample_cloud(const PointCloud& in, std::size_t max_points) {
  if (max_points == 0 || in.size() <= max_points) return in;
  PointCloud out;
  out.reserve(max_points);
  const double stride = static_cast<double>(in.size()) / static_cast<double>(max_points);
  for (std::size_t k = 0; k < max_points; ++k) {
    const std::size_t i = static_cast<std::size_t>(static_cast<double>(k) * stride);
    out.points.push_back(in.points[i]);
    out.intensities.push_back(in.intensities[i]);
    if (in.has_ring()) out.ring.push_back(in.ring[i]);
  }
  return out;
}

inline PointCloud merge_clouds(const PointCloud& a, const PointCloud& b) {
  PointCloud out = a;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  out.intensities.insert(out.intensities.end(), b.intensities.begin(),
                         b.intensities.end());
  if (a.has_ring() && b.has_ring()) {
    out.ring.insert(out.ring.end(), b.ring.begin(), b.ring.end());
  } else {
    out.ring.clear();
  }
  return out;
}

}  // namespace polecal

#endif  // POLECAL_CLOUD_HPP
