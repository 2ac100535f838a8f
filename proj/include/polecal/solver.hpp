#ifndef POLECAL_SOLVER_HPP
#define POLECAL_SOLVER_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "polecal/error.hpp"
#include "polecal/geometry.hpp"

namespace polecal {

/// One way of matching the second sensor's pole pair to the first's:
/// `pairing[i]` is the first-sensor line index for second-sensor pole i,
/// `sign[i]` the direction flip applied to second-sensor line i when
/// building the closed-form initialization.
struct CorrespondenceHypothesis {
  std::array<std::size_t, 2> pairing{0, 1};
  std::array<double, 2> sign{1.0, 1.0};
};

/// All 8 = 2 pairings x 4 direction-sign combinations, in a fixed order:
/// index h has pairing h/4, first sign flipped iff (h/2)%2, second iff h%2.
inline std::vector<CorrespondenceHypothesis> enumerate_hypotheses() {
  std::vector<CorrespondenceHypothesis> out;
  out.reserve(8);
  for (std::size_t h = 0; h < 8; ++h) {
    CorrespondenceHypothesis hyp;
    if (h / 4 == 0) {
      hyp.pairing = {0, 1};
    } else {
      hyp.pairing = {1, 0};
    }
    hyp.sign[0] = ((h / 2) % 2 == 0) ? 1.0 : -1.0;
    hyp.sign[1] = (h % 2 == 0) ? 1.0 : -1.0;
    out.push_back(hyp);
  }
  return out;
}

namespace detail {

/// Closest points of two skew lines; midpoint of the connecting segment
/// serves as the pair's center.
inline Vec3 line_pair_center(const Line3& l1, const Line3& l2) {
  const Vec3& d1 = l1.direction();
  const Vec3& d2 = l2.direction();
  const double d12 = d1.dot(d2);
  const double denom = 1.0 - d12 * d12;
  if (denom < 1e-12) {
    throw Error(ErrorCode::ParallelPoles,
                "line pair is parallel; center is undefined");
  }
  const Vec3 w0 = l1.anchor() - l2.anchor();
  const double u = (w0.dot(d2) - d12 * w0.dot(d1)) / denom;
  const double s = u * d12 - w0.dot(d1);
  const Vec3 p1 = l1.anchor() + s * d1;
  const Vec3 p2 = l2.anchor() + u * d2;
  return 0.5 * (p1 + p2);
}

/// Right-handed orthonormal frame adapted to an ordered direction pair.
inline Mat3 direction_frame(const Vec3& first, const Vec3& second) {
  const Vec3 e1 = first.normalized();
  Vec3 e2 = second - second.dot(e1) * e1;
  const double n = e2.norm();
  if (n < 1e-9) {
    throw Error(ErrorCode::ParallelPoles,
                "direction pair is parallel; frame is undefined");
  }
  e2 /= n;
  Mat3 f;
  f.col(0) = e1;
  f.col(1) = e2;
  f.col(2) = e1.cross(e2);
  return f;
}

}  // namespace detail

/// Closed-form alignment of two line pairs under one correspondence
/// hypothesis: the rotation carries the source pair's adapted frame (with
/// the hypothesis' direction signs applied) onto the target's, the
/// translation matches the pair centers. Exact when the pairs are rigidly
/// congruent; otherwise a starting guess for refinement.
/// Maps source-side coordinates into the target side.
inline RigidTransform closed_form_init(const std::array<Line3, 2>& target,
                                       const std::array<Line3, 2>& source,
                                       const CorrespondenceHypothesis& hyp) {
  const Line3& t_first = target[hyp.pairing[0]];
  const Line3& t_second = target[hyp.pairing[1]];
  // Signs are applied to raw vectors: Line3 would re-canonicalize them away.
  const Vec3 s_dir_first = hyp.sign[0] * source[0].direction();
  const Vec3 s_dir_second = hyp.sign[1] * source[1].direction();

  const Mat3 f_target =
      detail::direction_frame(t_first.direction(), t_second.direction());
  const Mat3 f_source = detail::direction_frame(s_dir_first, s_dir_second);
  const Rotation rot = Rotation::from_matrix(f_target * f_source.transpose());
  const Vec3 c_target = detail::line_pair_center(t_first, t_second);
  const Vec3 c_source = detail::line_pair_center(source[0], source[1]);
  return RigidTransform{rot, c_target - rot * c_source};
}

/// Point-to-line registration problem: second-sensor points, each assigned
/// to one first-sensor line; residual of a point is its transformed
/// perpendicular offset from the assigned line.
struct PointToLineProblem {
  std::array<Line3, 2> lines;            // in the target (first sensor) frame
  std::vector<Vec3> points;              // in the source (second sensor) frame
  std::vector<std::size_t> line_index;   // assignment per point

  std::size_t size() const { return points.size(); }

  void validate() const {
    if (points.size() != line_index.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "point/assignment length mismatch");
    }
    for (std::size_t k : line_index) {
      if (k >= 2) {
        throw Error(ErrorCode::InvalidArgument, "line index out of range");
      }
    }
  }

  /// Stacked 3N residual vector at the given transform.
  Eigen::VectorXd residuals(const RigidTransform& transform) const {
    Eigen::VectorXd r(3 * points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Line3& line = lines[line_index[i]];
      const Vec3 q = transform.apply(points[i]) - line.anchor();
      const Vec3 perp = q - line.direction().dot(q) * line.direction();
      r.segment<3>(3 * static_cast<Eigen::Index>(i)) = perp;
    }
    return r;
  }

  /// Analytic Jacobian of the stacked residuals with respect to a
  /// left-multiplicative increment [omega, u]:
  ///   R <- exp(omega) R,  t <- exp(omega) t + u.
  Eigen::MatrixXd jacobian(const RigidTransform& transform) const {
    Eigen::MatrixXd j(3 * points.size(), 6);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Line3& line = lines[line_index[i]];
      const Vec3& n = line.direction();
      const Mat3 proj = Mat3::Identity() - n * n.transpose();
      const Vec3 mapped = transform.apply(points[i]);
      j.block<3, 3>(3 * static_cast<Eigen::Index>(i), 0) = -proj * skew(mapped);
      j.block<3, 3>(3 * static_cast<Eigen::Index>(i), 3) = proj;
    }
    return j;
  }

  double cost(const RigidTransform& transform) const {
    return residuals(transform).squaredNorm();
  }
};

struct SolverParams {
  int max_iterations = 100;
  double lambda_init = 1e-3;
  double step_tolerance = 1e-10;
  double gradient_tolerance = 1e-10;
  bool use_huber = false;
  double huber_delta = 0.018;  // 3x the default measurement sigma
};

struct RefineResult {
  RigidTransform transform;
  double cost = 0.0;                // final sum of squared residual norms
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;   // cost after each accepted step
};

/// Levenberg-Marquardt on the point-to-line cost, analytic Jacobian,
/// left-multiplicative se(3)-style update. Optional Huber reweighting
/// caps the influence of residuals beyond `huber_delta`.
inline RefineResult refine(const PointToLineProblem& problem,
                           const RigidTransform& init,
                           const SolverParams& params = SolverParams{}) {
  problem.validate();
  if (problem.size() == 0) {
    throw Error(ErrorCode::NoCorrespondences, "refinement has no points");
  }

  const auto weighted_cost = [&](const Eigen::VectorXd& r) {
    if (!params.use_huber) return r.squaredNorm();
    double total = 0.0;
    const double delta = params.huber_delta;
    for (Eigen::Index i = 0; i < r.size(); i += 3) {
      const double norm = r.segment<3>(i).norm();
      total += (norm <= delta) ? norm * norm
                               : delta * (2.0 * norm - delta);
    }
    return total;
  };
  const auto apply_weights = [&](Eigen::VectorXd& r, Eigen::MatrixXd& j) {
    if (!params.use_huber) return;
    const double delta = params.huber_delta;
    for (Eigen::Index i = 0; i < r.size(); i += 3) {
      const double norm = r.segment<3>(i).norm();
      if (norm > delta) {
        const double w = std::sqrt(delta / norm);
        r.segment<3>(i) *= w;
        j.middleRows<3>(i) *= w;
      }
    }
  };

  RefineResult out;
  RigidTransform current = init;
  double lambda = params.lambda_init;
  Eigen::VectorXd r = problem.residuals(current);
  double cost = weighted_cost(r);
  out.cost_trace.push_back(cost);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    out.iterations = iter + 1;
    Eigen::VectorXd rw = r;
    Eigen::MatrixXd jw = problem.jacobian(current);
    apply_weights(rw, jw);

    const Eigen::Matrix<double, 6, 6> jtj = jw.transpose() * jw;
    const Eigen::Matrix<double, 6, 1> jtr = jw.transpose() * rw;
    if (jtr.lpNorm<Eigen::Infinity>() < params.gradient_tolerance) {
      out.converged = true;
      break;
    }

    Eigen::Matrix<double, 6, 6> damped = jtj;
    damped.diagonal() += lambda * (jtj.diagonal().array() + 1e-12).matrix();
    const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-jtr);

    const Rotation delta_rot = Rotation::exp(step.head<3>());
    const RigidTransform candidate{delta_rot * current.rotation,
                                   delta_rot * current.translation + step.tail<3>()};
    const Eigen::VectorXd r_cand = problem.residuals(candidate);
    const double cost_cand = weighted_cost(r_cand);

    if (cost_cand < cost) {
      current = candidate;
      r = r_cand;
      cost = cost_cand;
      out.cost_trace.push_back(cost);
      lambda = std::max(lambda * 0.1, 1e-12);
      if (step.norm() < params.step_tolerance) {
        out.converged = true;
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;  // stalled
    }
  }

  out.transform = current;
  out.cost = problem.residuals(current).squaredNorm();
  return out;
}

/// One fully refined correspondence hypothesis.
struct CandidateResult {
  CorrespondenceHypothesis hypothesis;
  RigidTransform init;
  RigidTransform refined;
  double cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_trace;
};

/// Everything the solver needs: the two fitted axes per sensor and the
/// second sensor's pole inlier points grouped by pole.
struct CalibrationInput {
  std::array<Line3, 2> target_lines;                // first sensor
  std::array<Line3, 2> source_lines;                // second sensor
  std::array<std::vector<Vec3>, 2> source_points;   // second sensor, per pole
};

/// Runs the closed-form + refinement pipeline for all 8 hypotheses.
/// Results come back in hypothesis order; the sign choices only affect the
/// initialization (the point-to-line cost is direction-sign invariant).
inline std::vector<CandidateResult> solve_all(const CalibrationInput& input,
                                              const SolverParams& params = SolverParams{}) {
  if (input.source_points[0].empty() && input.source_points[1].empty()) {
    throw Error(ErrorCode::NoCorrespondences, "no source pole points");
  }
  std::vector<CandidateResult> results;
  for (const CorrespondenceHypothesis& hyp : enumerate_hypotheses()) {
    PointToLineProblem problem;
    problem.lines = input.target_lines;
    for (std::size_t pole = 0; pole < 2; ++pole) {
      for (const Vec3& p : input.source_points[pole]) {
        problem.points.push_back(p);
        problem.line_index.push_back(hyp.pairing[pole]);
      }
    }

    CandidateResult cand;
    cand.hypothesis = hyp;
    cand.init = closed_form_init(input.target_lines, input.source_lines, hyp);
    RefineResult ref = refine(problem, cand.init, params);
    cand.refined = ref.transform;
    cand.cost = ref.cost;
    cand.iterations = ref.iterations;
    cand.converged = ref.converged;
    cand.cost_trace = std::move(ref.cost_trace);
    results.push_back(std::move(cand));
  }
  return results;
}

}  // namespace polecal

#endif  // POLECAL_SOLVER_HPP
