#pragma once

#include <vector>

#include "hpvit/joints.hpp"
#include "hpvit/svd3.hpp"

namespace hpvit {

/// x -> scale * R x + t, with R a proper rotation.
struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = mat_identity();
  Vec3 translation{0.0, 0.0, 0.0};

  Vec3 apply(const Vec3& p) const;
  JointSet apply(const JointSet& j) const;
};

/// Mean Euclidean joint distance in mm.
double mpjpe(const JointSet& pred, const JointSet& gt);

/// Similarity transform minimising sum |s R pred_i + t - gt_i|^2 (Umeyama,
/// reflections excluded). Throws DegenerateInputError when pred has zero spread.
SimilarityTransform procrustes_align(const JointSet& pred, const JointSet& gt);

double pa_mpjpe(const JointSet& pred, const JointSet& gt);

struct SampleMetrics {
  double mpjpe = 0.0;
  double pa_mpjpe = 0.0;
};

struct EvalReport {
  double mpjpe_mean = 0.0;
  double pa_mpjpe_mean = 0.0;
  std::vector<SampleMetrics> per_sample;
};

/// Per-sample MPJPE / PA-MPJPE (each sample aligned independently) and their means.
EvalReport evaluate(const std::vector<JointSet>& preds, const std::vector<JointSet>& gts);

}  // namespace hpvit
