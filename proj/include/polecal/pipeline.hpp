#ifndef POLECAL_PIPELINE_HPP
#define POLECAL_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "polecal/cloud.hpp"
#include "polecal/disambiguate.hpp"
#include "polecal/error.hpp"
#include "polecal/extraction.hpp"
#include "polecal/geometry.hpp"
#include "polecal/io.hpp"
#include "polecal/metrics.hpp"
#include "polecal/simulator.hpp"
#include "polecal/solver.hpp"

namespace polecal {

struct PipelineParams {
  ExtractionParams extraction;
  SolverParams solver;
  IcpParams icp;
};

/// Overlays config-file keys onto the defaults. Sections: [extraction]
/// vendor|threshold|cluster_eps|min_points|max_rms|radius|refine_axis,
/// [solver] max_iterations|lambda_init|step_tolerance|gradient_tolerance|
/// use_huber|huber_delta, [icp] max_iterations|max_distance|epsilon|max_points.
inline PipelineParams params_from_config(const KeyValueDocument& cfg) {
  PipelineParams p;
  if (cfg.has("extraction.vendor")) {
    p.extraction.intensity_threshold =
        ThresholdTable::for_vendor(cfg.get("extraction.vendor"));
  }
  p.extraction.intensity_threshold =
      cfg.get_double_or("extraction.threshold", p.extraction.intensity_threshold);
  p.extraction.cluster_eps =
      cfg.get_double_or("extraction.cluster_eps", p.extraction.cluster_eps);
  p.extraction.min_points = static_cast<std::size_t>(cfg.get_int_or(
      "extraction.min_points", static_cast<long long>(p.extraction.min_points)));
  p.extraction.max_rms = cfg.get_double_or("extraction.max_rms", p.extraction.max_rms);
  p.extraction.radius = cfg.get_double_or("extraction.radius", p.extraction.radius);
  p.extraction.refine_axis =
      cfg.get_bool_or("extraction.refine_axis", p.extraction.refine_axis);

  p.solver.max_iterations = static_cast<int>(
      cfg.get_int_or("solver.max_iterations", p.solver.max_iterations));
  p.solver.lambda_init = cfg.get_double_or("solver.lambda_init", p.solver.lambda_init);
  p.solver.step_tolerance =
      cfg.get_double_or("solver.step_tolerance", p.solver.step_tolerance);
  p.solver.gradient_tolerance =
      cfg.get_double_or("solver.gradient_tolerance", p.solver.gradient_tolerance);
  p.solver.use_huber = cfg.get_bool_or("solver.use_huber", p.solver.use_huber);
  p.solver.huber_delta = cfg.get_double_or("solver.huber_delta", p.solver.huber_delta);

  p.icp.max_iterations =
      static_cast<int>(cfg.get_int_or("icp.max_iterations", p.icp.max_iterations));
  p.icp.max_correspondence_distance =
      cfg.get_double_or("icp.max_distance", p.icp.max_correspondence_distance);
  p.icp.relative_cost_epsilon =
      cfg.get_double_or("icp.epsilon", p.icp.relative_cost_epsilon);
  p.icp.max_points = static_cast<std::size_t>(
      cfg.get_int_or("icp.max_points", static_cast<long long>(p.icp.max_points)));
  return p;
}

/// End-to-end result of calibrating one scan pair.
struct CalibrationOutcome {
  ExtractionResult reference;  // first sensor
  ExtractionResult moving;     // second sensor
  std::vector<CandidateResult> candidates;
  DisambiguationResult disambiguation;
  std::size_t best_index = 0;
  RigidTransform extrinsic;  // second sensor frame -> first sensor frame
};

/// Extract poles from both scans, solve all correspondence hypotheses, and
/// pick the winner by full-scene ICP. The solver consumes the moving
/// sensor's pole points projected onto their own recovered axis, so the
/// point-to-line cost vanishes exactly at the true extrinsic on clean data.
inline CalibrationOutcome calibrate_scans(const PointCloud& reference_scan,
                                          const PointCloud& moving_scan,
                                          const PipelineParams& params = PipelineParams{}) {
  CalibrationOutcome out;
  out.reference = extract_poles(reference_scan, params.extraction);
  out.moving = extract_poles(moving_scan, params.extraction);

  CalibrationInput input;
  input.target_lines = {out.reference.poles[0].line, out.reference.poles[1].line};
  input.source_lines = {out.moving.poles[0].line, out.moving.poles[1].line};
  for (std::size_t pole = 0; pole < 2; ++pole) {
    const Line3& axis = out.moving.poles[pole].line;
    for (std::size_t idx : out.moving.indices[pole]) {
      const Vec3& p = moving_scan.points[idx];
      input.source_points[pole].push_back(axis.point_at(axis.project(p)));
    }
  }

  out.candidates = solve_all(input, params.solver);
  out.disambiguation =
      select_best(out.candidates, moving_scan, reference_scan, params.icp);
  out.best_index = out.disambiguation.best_index;
  out.extrinsic = out.candidates[out.best_index].refined;
  return out;
}

/// One simulated scenario pushed through the full pipeline, with errors
/// against the scenario's ground truth.
struct TrialResult {
  CalibrationOutcome outcome;
  RigidTransform ground_truth;
  double e_r = 0.0;   // radians
  double e_t = 0.0;   // meters
  double e_rt = 0.0;  // range-averaged meters
  bool hypothesis_correct = false;
};

/// The chosen candidate counts as correct when it is far closer to the
/// truth than any symmetry impostor (those differ by about a half-turn).
inline bool is_correct_hypothesis(const RigidTransform& chosen,
                                  const RigidTransform& truth) {
  const TransformDelta d = transform_delta(truth, chosen);
  return d.rotation_angle < 0.26 && d.translation_distance < 0.5;
}

inline TrialResult run_trial(const Scenario& scenario,
                             const PipelineParams& params = PipelineParams{}) {
  TrialResult tr;
  const PointCloud scan1 = generate_scan(scenario, 0);
  const PointCloud scan2 = generate_scan(scenario, 1);
  tr.outcome = calibrate_scans(scan1, scan2, params);
  tr.ground_truth = scenario.ground_truth();
  const TransformDelta d = transform_delta(tr.ground_truth, tr.outcome.extrinsic);
  tr.e_r = d.rotation_angle;
  tr.e_t = d.translation_distance;
  tr.e_rt = extrinsic_error(tr.outcome.extrinsic, tr.ground_truth);
  tr.hypothesis_correct = is_correct_hypothesis(tr.outcome.extrinsic, tr.ground_truth);
  return tr;
}

struct TrialSummary {
  std::uint64_t seed = 0;
  double e_r = 0.0;
  double e_t = 0.0;
  double e_rt = 0.0;
  bool success = false;
};

struct BatchResult {
  std::vector<TrialSummary> trials;
  std::size_t successes = 0;
  double mean_e_r = 0.0, mean_e_t = 0.0, mean_e_rt = 0.0;
  double std_e_r = 0.0, std_e_t = 0.0, std_e_rt = 0.0;
};

/// Runs `count` random scenarios with seeds base, base+1, ... and
/// aggregates the error statistics.
inline BatchResult run_trials(std::uint64_t base_seed, std::size_t count,
                              double sigma, std::size_t clutter_count = 400,
                              const PipelineParams& params = PipelineParams{}) {
  if (count == 0) {
    throw Error(ErrorCode::InvalidArgument, "trial count must be > 0");
  }
  BatchResult batch;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t seed = base_seed + i;
    const Scenario scenario = random_scenario(seed, sigma, clutter_count);
    const TrialResult tr = run_trial(scenario, params);
    TrialSummary s;
    s.seed = seed;
    s.e_r = tr.e_r;
    s.e_t = tr.e_t;
    s.e_rt = tr.e_rt;
    s.success = tr.hypothesis_correct;
    if (s.success) ++batch.successes;
    batch.trials.push_back(s);
  }
  const double n = static_cast<double>(batch.trials.size());
  for (const TrialSummary& s : batch.trials) {
    batch.mean_e_r += s.e_r / n;
    batch.mean_e_t += s.e_t / n;
    batch.mean_e_rt += s.e_rt / n;
  }
  for (const TrialSummary& s : batch.trials) {
    batch.std_e_r += (s.e_r - batch.mean_e_r) * (s.e_r - batch.mean_e_r) / n;
    batch.std_e_t += (s.e_t - batch.mean_e_t) * (s.e_t - batch.mean_e_t) / n;
    batch.std_e_rt += (s.e_rt - batch.mean_e_rt) * (s.e_rt - batch.mean_e_rt) / n;
  }
  batch.std_e_r = std::sqrt(batch.std_e_r);
  batch.std_e_t = std::sqrt(batch.std_e_t);
  batch.std_e_rt = std::sqrt(batch.std_e_rt);
  return batch;
}

// ---------------------------------------------------------------------------
// Single-pole axis-fit accuracy sweep

/// One (sensor distance, pole radius) case: a z-axis pole scanned from
/// [x_p, 0, 0] with the given orientation, the returns fitted by plain
/// total least squares, and the fit scored against the true axis in both
/// integrand modes over the returns' height window.
struct AxisFitSample {
  double x_p = 0.0;
  double r = 0.0;
  double sum_error = 0.0;
  double product_error = 0.0;
};

inline AxisFitSample single_pole_axis_case(double x_p, double r,
                                           const Rotation& orientation) {
  PoleSpec pole;
  pole.anchor = Vec3::Zero();
  pole.direction = Vec3::UnitZ();
  pole.radius = r;
  pole.z_min = -100.0;
  pole.z_max = 100.0;
  const LidarModel model = LidarModel::vlp16(0.0);
  const RigidTransform pose{orientation, Vec3(x_p, 0.0, 0.0)};

  const std::vector<Vec3> local = simulate_pole_scan(pose, pole, model);
  if (local.size() < 2) {
    throw Error(ErrorCode::DegenerateGeometry,
                "axis-fit case produced fewer than 2 returns");
  }
  std::vector<Vec3> world;
  world.reserve(local.size());
  double z_lo = std::numeric_limits<double>::infinity();
  double z_hi = -std::numeric_limits<double>::infinity();
  for (const Vec3& p : local) {
    const Vec3 w = pose.apply(p);
    world.push_back(w);
    z_lo = std::min(z_lo, w.z());
    z_hi = std::max(z_hi, w.z());
  }
  const FittedPole fit = fit_line(world);

  AxisFitSample sample;
  sample.x_p = x_p;
  sample.r = r;
  sample.sum_error = axis_fit_error(fit.line, z_lo, z_hi, AxisFitIntegrand::Sum);
  sample.product_error =
      axis_fit_error(fit.line, z_lo, z_hi, AxisFitIntegrand::Product);
  return sample;
}

/// The standard sweep grid: x_p in {10, 6, 4} by r in {0.3, 0.2, 0.1}.
inline std::vector<AxisFitSample> axis_fit_sweep(const Rotation& orientation) {
  std::vector<AxisFitSample> out;
  for (double x_p : {10.0, 6.0, 4.0}) {
    for (double r : {0.3, 0.2, 0.1}) {
      out.push_back(single_pole_axis_case(x_p, r, orientation));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

/// Deterministic calibration report: identical inputs serialize to
/// identical bytes (insertion-ordered keys, lossless doubles, no
/// timestamps or paths).
inline KeyValueDocument outcome_to_report(const CalibrationOutcome& outcome) {
  KeyValueDocument doc;
  doc.set("report.format", "polecal-calibration");
  doc.set_int("report.version", 1);

  const auto put_extraction = [&](const std::string& prefix,
                                  const ExtractionResult& ex) {
    for (std::size_t i = 0; i < 2; ++i) {
      const std::string p = prefix + ".pole" + std::to_string(i);
      const FittedPole& pole = ex.poles[i];
      doc.set_vec3(p + ".anchor", pole.line.anchor());
      doc.set_vec3(p + ".direction", pole.line.direction());
      doc.set_uint(p + ".inliers", pole.inlier_count);
      doc.set_double(p + ".rms", pole.rms);
      doc.set_double(p + ".z_span", pole.z_span);
    }
  };
  put_extraction("reference", outcome.reference);
  put_extraction("moving", outcome.moving);

  for (std::size_t i = 0; i < outcome.candidates.size(); ++i) {
    const std::string p = "candidate" + std::to_string(i);
    const CandidateResult& c = outcome.candidates[i];
    doc.set(p + ".pairing", std::to_string(c.hypothesis.pairing[0]) + " " +
                                std::to_string(c.hypothesis.pairing[1]));
    doc.set(p + ".signs",
            detail::format_double(c.hypothesis.sign[0]) + " " +
                detail::format_double(c.hypothesis.sign[1]));
    transform_to_doc(doc, p + ".transform", c.refined);
    doc.set_double(p + ".cost", c.cost);
    doc.set_int(p + ".iterations", c.iterations);
    doc.set_bool(p + ".converged", c.converged);
    const CandidateScore& score = outcome.disambiguation.scores[i];
    doc.set_double(p + ".icp_rotation", score.rotation_correction);
    doc.set_double(p + ".icp_translation", score.translation_correction);
  }

  doc.set_uint("result.best_candidate", outcome.best_index);
  transform_to_doc(doc, "result.extrinsic", outcome.extrinsic);
  return doc;
}

}  // namespace polecal

#endif  // POLECAL_PIPELINE_HPP
