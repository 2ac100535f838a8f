// Minimal end-to-end use of the library: simulate a two-sensor scene with
// two reflective poles, run the calibration, compare with the known truth.

#include <cstdio>

#include "polecal/polecal.hpp"

int main() {
  using namespace polecal;

  const Scenario scenario = random_scenario(/*seed=*/42, /*noise_sigma=*/0.006);
  const PointCloud reference_scan = generate_scan(scenario, 0);
  const PointCloud moving_scan = generate_scan(scenario, 1);
  std::printf("reference scan: %zu points, moving scan: %zu points\n",
              reference_scan.size(), moving_scan.size());

  const CalibrationOutcome outcome = calibrate_scans(reference_scan, moving_scan);

  const RigidTransform truth = scenario.ground_truth();
  const TransformDelta delta = transform_delta(truth, outcome.extrinsic);
  std::printf("best candidate: %zu of %zu\n", outcome.best_index,
              outcome.candidates.size());
  std::printf("rotation error:    %.6f rad\n", delta.rotation_angle);
  std::printf("translation error: %.6f m\n", delta.translation_distance);
  std::printf("range-averaged:    %.6f m\n",
              extrinsic_error(outcome.extrinsic, truth));

  const Vec3 t = outcome.extrinsic.translation;
  std::printf("extrinsic translation: [%.4f, %.4f, %.4f]\n", t.x(), t.y(), t.z());
  return 0;
}
