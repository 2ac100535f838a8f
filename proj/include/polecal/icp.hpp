#ifndef POLECAL_ICP_HPP
#define POLECAL_ICP_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"
#include "polecal/kdtree.hpp"

namespace polecal {

struct IcpParams {
  int max_iterations = 50;
  double max_correspondence_distance = 1.0;  // gating, meters
  double relative_cost_epsilon = 1e-6;       // convergence on cost change
  std::size_t max_points = 5000;             // stride-subsample cap on source
};

struct IcpResult {
  RigidTransform correction;  // applied on top of the initial guess
  double mean_squared_error = 0.0;
  std::size_t correspondences = 0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

/// Least-squares rigid fit src -> dst over matched pairs (SVD of the
/// cross-covariance, with the usual determinant correction).
inline RigidTransform best_fit_transform(const std::vector<Vec3>& src,
                                         const std::vector<Vec3>& dst) {
  Vec3 c_src = Vec3::Zero();
  Vec3 c_dst = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    c_src += src[i];
    c_dst += dst[i];
  }
  c_src /= static_cast<double>(src.size());
  c_dst /= static_cast<double>(src.size());

  Mat3 h = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    h += (src[i] - c_src) * (dst[i] - c_dst).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixV() * svd.matrixU().transpose();
  if (r.determinant() < 0.0) {
    Mat3 v = svd.matrixV();
    v.col(2) *= -1.0;
    r = v * svd.matrixU().transpose();
  }
  const Rotation rot = Rotation::from_matrix(r);
  return RigidTransform{rot, c_dst - rot * c_src};
}

}  // namespace detail

/// Point-to-point ICP of `source` onto `target`, starting from `init`.
/// Returns the correction C such that C * init aligns source onto target;
/// a good initial guess therefore yields a correction near identity.
inline IcpResult icp_register(const PointCloud& source, const PointCloud& target,
                              const RigidTransform& init,
                              const IcpParams& params = IcpParams{}) {
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::NoCorrespondences, "icp requires nonempty clouds");
  }
  const PointCloud src = subsample_cloud(source, params.max_points);
  const KdTree tree(target.points);

  IcpResult out;
  RigidTransform total = init;
  double prev_mse = -1.0;
  const double gate2 = params.max_correspondence_distance *
                       params.max_correspondence_distance;

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    out.iterations = iter + 1;
    std::vector<Vec3> matched_src;
    std::vector<Vec3> matched_dst;
    double sq_sum = 0.0;
    for (const Vec3& p : src.points) {
      const Vec3 moved = total.apply(p);
      const KdTree::Result nn =
          tree.nearest(moved, params.max_correspondence_distance);
      if (!nn.found() || nn.squared_distance > gate2) continue;
      matched_src.push_back(moved);
      matched_dst.push_back(target.points[nn.index]);
      sq_sum += nn.squared_distance;
    }
    if (matched_src.size() < 3) {
      throw Error(ErrorCode::NoCorrespondences,
                  "icp: fewer than 3 gated correspondences");
    }
    out.correspondences = matched_src.size();
    out.mean_squared_error = sq_sum / static_cast<double>(matched_src.size());

    if (prev_mse >= 0.0) {
      const double denom = std::max(prev_mse, 1e-300);
      if (std::abs(prev_mse - out.mean_squared_error) / denom <
          params.relative_cost_epsilon) {
        out.converged = true;
        break;
      }
    }
    prev_mse = out.mean_squared_error;

    const RigidTransform step = detail::best_fit_transform(matched_src, matched_dst);
    total = step * total;
  }

  out.correction = total * init.inverse();
  return out;
}

}  // namespace polecal

#endif  // POLECAL_ICP_HPP
