#ifndef POLECAL_DISAMBIGUATE_HPP
#define POLECAL_DISAMBIGUATE_HPP

#include <cstddef>
#include <limits>
#include <vector>

#include "polecal/cloud.hpp"
#include "polecal/error.hpp"
#include "polecal/geometry.hpp"
#include "polecal/icp.hpp"
#include "polecal/solver.hpp"

namespace polecal {

/// How far full-scene ICP had to move a candidate extrinsic.
/// A correct candidate already aligns the scenes, so its correction is
/// near identity; the symmetric impostors need a large correction.
struct CandidateScore {
  std::size_t candidate_index = 0;
  double rotation_correction = 0.0;     // radians
  double translation_correction = 0.0;  // meters
  double combined() const {
    return rotation_correction + translation_correction;
  }
  IcpResult icp;
};

/// Scores one candidate: ICP from the candidate transform, then the
/// rotation angle and translation norm of the resulting correction.
inline CandidateScore score_candidate(const PointCloud& source_scene,
                                      const PointCloud& target_scene,
                                      const RigidTransform& candidate,
                                      const IcpParams& params = IcpParams{}) {
  CandidateScore score;
  score.icp = icp_register(source_scene, target_scene, candidate, params);
  score.rotation_correction = rotation_error(score.icp.correction.rotation);
  score.translation_correction = score.icp.correction.translation.norm();
  return score;
}

struct DisambiguationResult {
  std::size_t best_index = 0;
  std::vector<CandidateScore> scores;  // parallel to the candidate list
};

/// Scores every refined candidate against the full scenes and picks the
/// one whose ICP correction is smallest (rotation + translation, with the
/// translation weighted at 1 meter per radian).
inline DisambiguationResult select_best(const std::vector<CandidateResult>& candidates,
                                        const PointCloud& source_scene,
                                        const PointCloud& target_scene,
                                        const IcpParams& params = IcpParams{}) {
  if (candidates.empty()) {
    throw Error(ErrorCode::DisambiguationFailed, "no candidates to score");
  }
  DisambiguationResult out;
  double best = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    CandidateScore score;
    try {
      score = score_candidate(source_scene, target_scene,
                              candidates[i].refined, params);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoCorrespondences) {
        // Candidate maps the scene out of gating range entirely; worst score.
        score.rotation_correction = std::numeric_limits<double>::infinity();
        score.translation_correction = std::numeric_limits<double>::infinity();
        score.candidate_index = i;
        out.scores.push_back(score);
        continue;
      }
      throw;
    }
    score.candidate_index = i;
    out.scores.push_back(score);
    if (score.combined() < best) {
      best = score.combined();
      out.best_index = i;
      any = true;
    }
  }
  if (!any) {
    throw Error(ErrorCode::DisambiguationFailed,
                "no candidate produced a finite alignment score");
  }
  return out;
}

}  // namespace polecal

#endif  // POLECAL_DISAMBIGUATE_HPP
