// polecal: extrinsic calibration between two fixed LiDARs from scans of two
// retro-reflective poles, plus the simulator and evaluation tools around it.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "polecal/polecal.hpp"

namespace {

using polecal::KeyValueDocument;

struct CommonOpts {
  std::string config_path;
  KeyValueDocument config;
  polecal::PipelineParams params;

  void load() {
    config = polecal::load_config(config_path);
    params = polecal::params_from_config(config);
  }
};

void emit(const KeyValueDocument& doc, const std::string& out_path) {
  const std::string text = doc.serialize();
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    polecal::detail::write_text_file(out_path, text);
  }
}

void add_truth_errors(KeyValueDocument& doc, const polecal::RigidTransform& result,
                      const polecal::RigidTransform& truth) {
  polecal::transform_to_doc(doc, "truth.extrinsic", truth);
  const polecal::TransformDelta d = polecal::transform_delta(truth, result);
  doc.set_double("truth.e_r", d.rotation_angle);
  doc.set_double("truth.e_t", d.translation_distance);
  doc.set_double("truth.e_rt", polecal::extrinsic_error(result, truth));
  doc.set_bool("truth.hypothesis_correct",
               polecal::is_correct_hypothesis(result, truth));
}

int run_simulate(const CommonOpts& common, std::uint64_t seed, double sigma,
                 std::size_t clutter, const std::string& out_dir) {
  (void)common;
  const polecal::Scenario scenario = polecal::random_scenario(seed, sigma, clutter);
  const polecal::PointCloud reference = polecal::generate_scan(scenario, 0);
  const polecal::PointCloud moving = polecal::generate_scan(scenario, 1);

  std::filesystem::create_directories(out_dir);
  const std::string ref_path = out_dir + "/scan_reference.pcd";
  const std::string mov_path = out_dir + "/scan_moving.pcd";
  const std::string man_path = out_dir + "/manifest.txt";
  polecal::write_cloud(ref_path, reference);
  polecal::write_cloud(mov_path, moving);
  polecal::detail::write_text_file(man_path,
                                   polecal::scenario_to_manifest(scenario).serialize());

  std::printf("wrote %s (%zu points)\n", ref_path.c_str(), reference.size());
  std::printf("wrote %s (%zu points)\n", mov_path.c_str(), moving.size());
  std::printf("wrote %s\n", man_path.c_str());
  return 0;
}

int run_extract(const CommonOpts& common, const std::string& in_path,
                const std::string& out_path) {
  const polecal::PointCloud cloud = polecal::read_cloud(in_path);
  const polecal::ExtractionResult ex =
      polecal::extract_poles(cloud, common.params.extraction);

  KeyValueDocument doc;
  doc.set("report.format", "polecal-extraction");
  doc.set_int("report.version", 1);
  doc.set_uint("input.points", cloud.size());
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string p = "pole" + std::to_string(i);
    const polecal::FittedPole& pole = ex.poles[i];
    doc.set_vec3(p + ".anchor", pole.line.anchor());
    doc.set_vec3(p + ".direction", pole.line.direction());
    doc.set_uint(p + ".inliers", pole.inlier_count);
    doc.set_double(p + ".rms", pole.rms);
    doc.set_double(p + ".z_span", pole.z_span);
  }
  emit(doc, out_path);
  return 0;
}

int run_calibrate(const CommonOpts& common, const std::string& ref_path,
                  const std::string& mov_path, const std::string& manifest_path,
                  const std::string& out_path) {
  const polecal::PointCloud reference = polecal::read_cloud(ref_path);
  const polecal::PointCloud moving = polecal::read_cloud(mov_path);
  const polecal::CalibrationOutcome outcome =
      polecal::calibrate_scans(reference, moving, common.params);

  KeyValueDocument doc = polecal::outcome_to_report(outcome);
  doc.set("run.command", "calibrate");
  doc.set_uint("run.config_hash", common.config.hash());
  if (!manifest_path.empty()) {
    const KeyValueDocument manifest = KeyValueDocument::parse_file(manifest_path);
    add_truth_errors(doc, outcome.extrinsic,
                     polecal::transform_from_doc(manifest, "ground_truth"));
  }
  emit(doc, out_path);
  return 0;
}

int run_pipeline(const CommonOpts& common, std::uint64_t seed, double sigma,
                 std::size_t clutter, std::size_t trials,
                 const std::string& out_path) {
  KeyValueDocument doc;
  if (trials <= 1) {
    const polecal::Scenario scenario = polecal::random_scenario(seed, sigma, clutter);
    const polecal::TrialResult tr = polecal::run_trial(scenario, common.params);
    doc = polecal::outcome_to_report(tr.outcome);
    doc.set("run.command", "pipeline");
    doc.set_uint("run.seed", seed);
    doc.set_double("run.sigma", sigma);
    doc.set_uint("run.clutter", clutter);
    doc.set_uint("run.config_hash", common.config.hash());
    add_truth_errors(doc, tr.outcome.extrinsic, tr.ground_truth);
  } else {
    const polecal::BatchResult batch =
        polecal::run_trials(seed, trials, sigma, clutter, common.params);
    doc.set("report.format", "polecal-batch");
    doc.set_int("report.version", 1);
    doc.set("run.command", "pipeline");
    doc.set_uint("run.seed", seed);
    doc.set_double("run.sigma", sigma);
    doc.set_uint("run.clutter", clutter);
    doc.set_uint("run.trials", trials);
    doc.set_uint("run.config_hash", common.config.hash());
    for (std::size_t i = 0; i < batch.trials.size(); ++i) {
      const polecal::TrialSummary& s = batch.trials[i];
      const std::string p = "trial" + std::to_string(i);
      doc.set_uint(p + ".seed", s.seed);
      doc.set_double(p + ".e_r", s.e_r);
      doc.set_double(p + ".e_t", s.e_t);
      doc.set_double(p + ".e_rt", s.e_rt);
      doc.set_bool(p + ".success", s.success);
    }
    doc.set_uint("summary.successes", batch.successes);
    doc.set_double("summary.mean_e_r", batch.mean_e_r);
    doc.set_double("summary.mean_e_t", batch.mean_e_t);
    doc.set_double("summary.mean_e_rt", batch.mean_e_rt);
    doc.set_double("summary.std_e_r", batch.std_e_r);
    doc.set_double("summary.std_e_t", batch.std_e_t);
    doc.set_double("summary.std_e_rt", batch.std_e_rt);
  }
  emit(doc, out_path);
  return 0;
}

int run_axis_sweep(const std::string& integrand, const std::string& out_path) {
  KeyValueDocument doc;
  doc.set("report.format", "polecal-axis-sweep");
  doc.set_int("report.version", 1);
  const std::vector<std::pair<std::string, polecal::Rotation>> orientations = {
      {"q1", polecal::reference_orientation_q1()},
      {"q2", polecal::reference_orientation_q2()},
  };
  for (const auto& [name, rot] : orientations) {
    const std::vector<polecal::AxisFitSample> sweep = polecal::axis_fit_sweep(rot);
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const polecal::AxisFitSample& s = sweep[i];
      const std::string p = name + ".case" + std::to_string(i);
      doc.set_double(p + ".x_p", s.x_p);
      doc.set_double(p + ".r", s.r);
      doc.set_double(p + ".sum_error", s.sum_error);
      doc.set_double(p + ".product_error", s.product_error);
      if (out_path.empty()) continue;
      // With --out the table still goes to the terminal for a quick read.
      const double shown = integrand == "product" ? s.product_error : s.sum_error;
      std::printf("%s  x_p=%4.1f  r=%.1f  %s=%.6f\n", name.c_str(), s.x_p, s.r,
                  integrand.c_str(), shown);
    }
  }
  emit(doc, out_path);
  return 0;
}

int run_errors(const std::string& report_path, const std::string& manifest_path,
               const std::string& out_path) {
  const KeyValueDocument report = KeyValueDocument::parse_file(report_path);
  const KeyValueDocument manifest = KeyValueDocument::parse_file(manifest_path);
  const polecal::RigidTransform result =
      polecal::transform_from_doc(report, "result.extrinsic");
  const polecal::RigidTransform truth =
      polecal::transform_from_doc(manifest, "ground_truth");

  KeyValueDocument doc;
  doc.set("report.format", "polecal-errors");
  doc.set_int("report.version", 1);
  add_truth_errors(doc, result, truth);
  emit(doc, out_path);
  return 0;
}

int run_rqe(const CommonOpts& common, const std::string& ref_path,
            const std::string& mov_path, const std::string& report_path,
            double kernel_sigma, const std::string& out_path) {
  (void)common;
  const polecal::PointCloud reference = polecal::read_cloud(ref_path);
  const polecal::PointCloud moving = polecal::read_cloud(mov_path);
  const KeyValueDocument report = KeyValueDocument::parse_file(report_path);
  const polecal::RigidTransform extrinsic =
      polecal::transform_from_doc(report, "result.extrinsic");

  std::vector<polecal::Vec3> merged;
  merged.reserve(reference.size() + moving.size());
  for (const polecal::Vec3& p : reference.points) merged.push_back(p);
  for (const polecal::Vec3& p : moving.points) merged.push_back(extrinsic.apply(p));

  KeyValueDocument doc;
  doc.set("report.format", "polecal-rqe");
  doc.set_int("report.version", 1);
  doc.set_uint("input.points", merged.size());
  doc.set_double("input.kernel_sigma", kernel_sigma);
  doc.set_double("result.rqe", polecal::rqe_score(merged, kernel_sigma));
  emit(doc, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-LiDAR extrinsic calibration from retro-reflective pole scans"};
  app.require_subcommand(1);

  CommonOpts common;
  app.add_option("--config", common.config_path,
                 "Config file (key=value with [sections]); default $POLECAL_CONFIG");

  std::uint64_t seed = 1;
  double sigma = 0.006;
  std::size_t clutter = 400;
  std::size_t trials = 1;
  std::string out_path, in_path, ref_path, mov_path, manifest_path, report_path;
  std::string integrand = "sum";
  double kernel_sigma = 0.05;
  bool axis_sweep = false, errors_mode = false, rqe_mode = false;

  CLI::App* sim = app.add_subcommand("simulate", "Generate a random scenario: two scans plus a manifest");
  sim->add_option("--seed", seed, "Scenario RNG seed")->capture_default_str();
  sim->add_option("--sigma", sigma, "Measurement noise, meters")->capture_default_str();
  sim->add_option("--clutter", clutter, "Non-pole scene points")->capture_default_str();
  sim->add_option("--out", out_path, "Output directory")->required();

  CLI::App* ext = app.add_subcommand("extract", "Fit the two pole axes in one scan");
  ext->add_option("--in", in_path, "Input cloud (.pcd or .csv)")->required();
  ext->add_option("--out", out_path, "Report path (default: stdout)");

  CLI::App* cal = app.add_subcommand("calibrate", "Calibrate from two scan files");
  cal->add_option("--reference", ref_path, "Reference-sensor scan")->required();
  cal->add_option("--moving", mov_path, "Moving-sensor scan")->required();
  cal->add_option("--manifest", manifest_path, "Scenario manifest for ground-truth errors");
  cal->add_option("--out", out_path, "Report path (default: stdout)");

  CLI::App* eva = app.add_subcommand("evaluate", "Accuracy studies");
  eva->add_flag("--axis-sweep", axis_sweep, "Single-pole axis-fit error over distance x radius grid");
  eva->add_flag("--errors", errors_mode, "Compare a calibration report against a manifest");
  eva->add_flag("--rqe", rqe_mode, "Entropy score of the merged, aligned scans");
  eva->add_option("--integrand", integrand, "Axis-sweep column to print: sum|product")
      ->check(CLI::IsMember({"sum", "product"}))
      ->capture_default_str();
  eva->add_option("--report", report_path, "Calibration report path");
  eva->add_option("--manifest", manifest_path, "Scenario manifest path");
  eva->add_option("--reference", ref_path, "Reference-sensor scan (for --rqe)");
  eva->add_option("--moving", mov_path, "Moving-sensor scan (for --rqe)");
  eva->add_option("--kernel-sigma", kernel_sigma, "RQE kernel width, meters")
      ->capture_default_str();
  eva->add_option("--out", out_path, "Report path (default: stdout)");

  CLI::App* pip = app.add_subcommand("pipeline", "Simulate, calibrate, and score in one run");
  pip->add_option("--seed", seed, "Scenario RNG seed")->capture_default_str();
  pip->add_option("--sigma", sigma, "Measurement noise, meters")->capture_default_str();
  pip->add_option("--clutter", clutter, "Non-pole scene points")->capture_default_str();
  pip->add_option("--trials", trials, "Scenario count (seeds seed..seed+n-1)")
      ->capture_default_str();
  pip->add_option("--out", out_path, "Report path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    common.load();
    if (sim->parsed()) return run_simulate(common, seed, sigma, clutter, out_path);
    if (ext->parsed()) return run_extract(common, in_path, out_path);
    if (cal->parsed()) {
      return run_calibrate(common, ref_path, mov_path, manifest_path, out_path);
    }
    if (eva->parsed()) {
      const int modes = int(axis_sweep) + int(errors_mode) + int(rqe_mode);
      if (modes != 1) {
        throw polecal::Error(polecal::ErrorCode::InvalidArgument,
                             "evaluate needs exactly one of --axis-sweep, --errors, --rqe");
      }
      if (axis_sweep) return run_axis_sweep(integrand, out_path);
      if (errors_mode) {
        if (report_path.empty() || manifest_path.empty()) {
          throw polecal::Error(polecal::ErrorCode::InvalidArgument,
                               "--errors needs --report and --manifest");
        }
        return run_errors(report_path, manifest_path, out_path);
      }
      if (ref_path.empty() || mov_path.empty() || report_path.empty()) {
        throw polecal::Error(polecal::ErrorCode::InvalidArgument,
                             "--rqe needs --reference, --moving, and --report");
      }
      return run_rqe(common, ref_path, mov_path, report_path, kernel_sigma, out_path);
    }
    if (pip->parsed()) {
      return run_pipeline(common, seed, sigma, clutter, trials, out_path);
    }
  } catch (const polecal::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
