#ifndef POLECAL_EXTRACTION_HPP
#define POLECAL_EXTRACTION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"

namespace polecal {

/// Vendor-specific retro-reflector intensity cutoffs.
struct ThresholdTable {
  static double for_vendor(const std::string& vendor) {
    if (vendor == "velodyne") return 230.0;
    if (vendor == "hesai" || vendor == "leishen" || vendor == "robosense") {
      return 200.0;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown vendor '" + vendor + "'");
  }
  static constexpr double kDefault = 200.0;
};

struct ExtractionParams {
  double intensity_threshold = ThresholdTable::kDefault;
  double cluster_eps = 0.3;    // single-linkage distance, meters
  std::size_t min_points = 5;  // smaller clusters are noise
  double max_rms = 0.06;       // residual gate (3x the default radius), meters
  double radius = 0.02;        // known pole radius; 0 = unknown
  bool refine_axis = true;     // cylinder-axis recovery using the radius
};

/// Indices into the source cloud forming one connected component.
struct Cluster {
  std::vector<std::size_t> indices;
  Vec3 centroid = Vec3::Zero();
};

struct FittedPole {
  Line3 line{Vec3::Zero(), Vec3::UnitZ()};
  std::size_t inlier_count = 0;
  double rms = 0.0;    // root-mean-square orthogonal residual, meters
  double z_span = 0.0; // extent of the inliers along the fitted direction
};

/// Keeps indices of points at or above the threshold, order-preserving.
inline std::vector<std::size_t> filter_by_intensity(const PointCloud& cloud,
                                                    double threshold) {
  cloud.validate();
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.intensities[i] >= threshold) kept.push_back(i);
  }
  return kept;
}

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Single-linkage clustering over the given cloud indices: points closer
/// than eps are connected; components smaller than min_points are dropped.
/// Deterministic: clusters sorted by size descending (ties by smallest
/// member index), members ascending.
inline std::vector<Cluster> cluster_points(const PointCloud& cloud,
                                           const std::vector<std::size_t>& indices,
                                           double eps, std::size_t min_points) {
  if (!(eps > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "cluster eps must be > 0");
  }
  if (min_points < 2) {
    throw Error(ErrorCode::InvalidArgument, "min_points must be >= 2");
  }
  const double eps2 = eps * eps;
  detail::UnionFind uf(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    for (std::size_t j = i + 1; j < indices.size(); ++j) {
      const double d2 =
          (cloud.points[indices[i]] - cloud.points[indices[j]]).squaredNorm();
      if (d2 <= eps2) uf.unite(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> by_root(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    by_root[uf.find(i)].push_back(indices[i]);
  }
  std::vector<Cluster> clusters;
  for (auto& members : by_root) {
    if (members.size() < min_points) continue;
    Cluster c;
    c.indices = std::move(members);
    for (std::size_t idx : c.indices) c.centroid += cloud.points[idx];
    c.centroid /= static_cast<double>(c.indices.size());
    clusters.push_back(std::move(c));
  }
  std::stable_sort(clusters.begin(), clusters.end(),
                   [](const Cluster& a, const Cluster& b) {
                     return a.indices.size() > b.indices.size();
                   });
  return clusters;
}

/// Total-least-squares line: centroid anchor plus dominant scatter
/// direction; rms is the orthogonal residual.
inline FittedPole fit_line(const std::vector<Vec3>& points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::RankDeficient, "line fit needs at least 2 points");
  }
  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : points) centroid += p;
  centroid /= static_cast<double>(points.size());

  Mat3 scatter = Mat3::Zero();
  for (const Vec3& p : points) {
    const Vec3 d = p - centroid;
    scatter += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(scatter);
  const Eigen::Vector3d evals = eig.eigenvalues();  // ascending
  if (evals(2) < 1e-18) {
    throw Error(ErrorCode::RankDeficient, "line fit: points are coincident");
  }
  const Vec3 direction = eig.eigenvectors().col(2);

  FittedPole pole;
  pole.line = Line3(centroid, direction);
  pole.inlier_count = points.size();
  double sq = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : points) {
    const double d = point_to_line_distance(p, pole.line);
    sq += d * d;
    const double along = pole.line.project(p);
    lo = std::min(lo, along);
    hi = std::max(hi, along);
  }
  pole.rms = std::sqrt(sq / static_cast<double>(points.size()));
  pole.z_span = hi - lo;
  return pole;
}

/// Known-radius cylinder-axis recovery. Returns cannot lie on the pole's
/// central axis — they sit on the surface, so a plain line fit lands about
/// 0.7 r closer to the sensor than the axis. Starting from that fit, this
/// runs Levenberg-Marquardt on the point-to-surface residual
/// dist(p, axis) - r over a 4-dof near-`init` parameterization (2 anchor
/// offsets + 2 direction tilts in the init line's transverse plane).
/// Falls back to `init` when the problem is too small or degenerate.
inline Line3 refine_axis_with_radius(const std::vector<Vec3>& points,
                                     const Line3& init, double radius) {
  if (!(radius > 0.0) || points.size() < 5) return init;
  const Vec3 z = init.direction();
  const Vec3 x = z.unitOrthogonal();
  const Vec3 y = z.cross(x);

  Eigen::Vector4d q = Eigen::Vector4d::Zero();  // (ax, ay, nx, ny)
  const auto axis_of = [&](const Eigen::Vector4d& p) {
    const Vec3 anchor = init.anchor() + p[0] * x + p[1] * y;
    const Vec3 dir = (z + p[2] * x + p[3] * y).normalized();
    return std::make_pair(anchor, dir);
  };
  const auto residuals = [&](const Eigen::Vector4d& p, Eigen::VectorXd& r) {
    const auto [anchor, dir] = axis_of(p);
    r.resize(static_cast<Eigen::Index>(points.size()));
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 w = points[i] - anchor;
      r[static_cast<Eigen::Index>(i)] = (w - dir.dot(w) * dir).norm() - radius;
    }
  };

  Eigen::VectorXd r;
  residuals(q, r);
  double cost = r.squaredNorm();
  double lambda = 1e-6;

  for (int iter = 0; iter < 50; ++iter) {
    const auto [anchor, dir] = axis_of(q);
    const double mnorm = (z + q[2] * x + q[3] * y).norm();
    const Mat3 proj = Mat3::Identity() - dir * dir.transpose();
    const Vec3 dn_dx = proj * x / mnorm;
    const Vec3 dn_dy = proj * y / mnorm;

    Eigen::MatrixXd jac(points.size(), 4);
    Eigen::VectorXd res(points.size());
    bool degenerate = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3 w = points[i] - anchor;
      const Vec3 c = w - dir.dot(w) * dir;
      const double cn = c.norm();
      if (cn < 1e-12) {
        degenerate = true;
        break;
      }
      const Vec3 chat = c / cn;
      const Eigen::Index row = static_cast<Eigen::Index>(i);
      res[row] = cn - radius;
      jac(row, 0) = -chat.dot(x);
      jac(row, 1) = -chat.dot(y);
      jac(row, 2) = -dir.dot(w) * chat.dot(dn_dx);
      jac(row, 3) = -dir.dot(w) * chat.dot(dn_dy);
    }
    if (degenerate) return init;

    const Eigen::Matrix4d jtj = jac.transpose() * jac;
    const Eigen::Vector4d jtr = jac.transpose() * res;
    if (jtr.lpNorm<Eigen::Infinity>() < 1e-14) break;

    Eigen::Matrix4d damped = jtj;
    damped.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
    const Eigen::Vector4d step = damped.ldlt().solve(-jtr);

    Eigen::VectorXd r_cand;
    residuals(q + step, r_cand);
    const double cost_cand = r_cand.squaredNorm();
    if (cost_cand < cost) {
      q += step;
      cost = cost_cand;
      lambda = std::max(lambda * 0.1, 1e-12);
      if (step.norm() < 1e-12) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e10) break;
    }
  }
  const auto [anchor, dir] = axis_of(q);
  return Line3(anchor, dir);
}

/// Two fitted poles plus the cloud indices of each pole's inlier points.
struct ExtractionResult {
  std::array<FittedPole, 2> poles;
  std::array<std::vector<std::size_t>, 2> indices;

  std::vector<Vec3> pole_points(const PointCloud& cloud, std::size_t which) const {
    std::vector<Vec3> out;
    out.reserve(indices[which].size());
    for (std::size_t idx : indices[which]) out.push_back(cloud.points[idx]);
    return out;
  }
};

/// Full extraction: threshold, cluster, fit the two largest clusters,
/// optionally recover each central axis with the known radius. Results
/// ordered by cluster size descending; fails unless exactly two
/// non-parallel line-like candidates survive.
inline ExtractionResult extract_poles(const PointCloud& cloud,
                                      const ExtractionParams& params) {
  const std::vector<std::size_t> bright =
      filter_by_intensity(cloud, params.intensity_threshold);
  if (bright.empty()) {
    throw Error(ErrorCode::NoRetroReflectiveReturns,
                "no returns at or above intensity " +
                    std::to_string(params.intensity_threshold));
  }
  std::vector<Cluster> clusters =
      cluster_points(cloud, bright, params.cluster_eps, params.min_points);

  struct Candidate {
    FittedPole fit;
    std::vector<std::size_t> indices;
  };
  std::vector<Candidate> fits;
  for (Cluster& c : clusters) {
    std::vector<Vec3> pts;
    pts.reserve(c.indices.size());
    for (std::size_t idx : c.indices) pts.push_back(cloud.points[idx]);
    FittedPole fit;
    try {
      fit = fit_line(pts);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RankDeficient) continue;  // blob, not a pole
      throw;
    }
    if (params.refine_axis && params.radius > 0.0) {
      fit.line = refine_axis_with_radius(pts, fit.line, params.radius);
      double sq = 0.0;
      for (const Vec3& p : pts) {
        const double d = point_to_line_distance(p, fit.line);
        sq += d * d;
      }
      fit.rms = std::sqrt(sq / static_cast<double>(pts.size()));
    }
    if (fit.rms <= params.max_rms) {
      fits.push_back(Candidate{fit, std::move(c.indices)});
    }
  }

  if (fits.size() != 2) {
    throw Error(ErrorCode::TooFewClusters,
                "expected exactly 2 pole candidates, found " +
                    std::to_string(fits.size()));
  }
  const double d =
      std::abs(fits[0].fit.line.direction().dot(fits[1].fit.line.direction()));
  if (d >= 1.0 - 1e-6) {
    throw Error(ErrorCode::ParallelPoles,
                "extracted pole axes are parallel (|dot| = " + std::to_string(d) + ")");
  }
  ExtractionResult out;
  out.poles = {fits[0].fit, fits[1].fit};
  out.indices = {std::move(fits[0].indices), std::move(fits[1].indices)};
  return out;
}

}  // namespace polecal

#endif  // POLECAL_EXTRACTION_HPP
