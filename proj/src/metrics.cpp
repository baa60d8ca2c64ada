#include "hpvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hpvit/errors.hpp"

namespace hpvit {

Vec3 SimilarityTransform::apply(const Vec3& p) const {
  Vec3 out{};
  for (int r = 0; r < 3; ++r) {
    out[r] = scale * (rotation[r][0] * p[0] + rotation[r][1] * p[1] + rotation[r][2] * p[2]) + translation[r];
  }
  return out;
}

JointSet SimilarityTransform::apply(const JointSet& j) const {
  JointSet out;
  for (std::size_t i = 0; i < kNumJoints; ++i) out[i] = apply(j[i]);
  return out;
}

double mpjpe(const JointSet& pred, const JointSet& gt) {
  double total = 0.0;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    const double dx = pred[j][0] - gt[j][0];
    const double dy = pred[j][1] - gt[j][1];
    const double dz = pred[j][2] - gt[j][2];
    total += std::sqrt(dx * dx + dy * dy + dz * dz);
  }
  return total / static_cast<double>(kNumJoints);
}

SimilarityTransform procrustes_align(const JointSet& pred, const JointSet& gt) {
  pred.validate();
  gt.validate();
  const double n = static_cast<double>(kNumJoints);
  Vec3 mp{0, 0, 0}, mq{0, 0, 0};
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    for (int k = 0; k < 3; ++k) {
      mp[k] += pred[j][k] / n;
      mq[k] += gt[j][k] / n;
    }
  }
  // H = sum p~ q~^T; var_p = sum |p~|^2
  Mat3 h{};
  double var_p = 0.0;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    Vec3 p, q;
    for (int k = 0; k < 3; ++k) {
      p[k] = pred[j][k] - mp[k];
      q[k] = gt[j][k] - mq[k];
    }
    var_p += p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) h[r][c] += p[r] * q[c];
  }
  double scale_ref = 0.0;
  for (int k = 0; k < 3; ++k) scale_ref = std::max(scale_ref, std::abs(mp[k]));
  if (!(var_p > 1e-24 * std::max(1.0, scale_ref * scale_ref))) {
    throw DegenerateInputError("procrustes_align: prediction has zero spread");
  }

  // H = U S V^T  ->  R = V D U^T, D = diag(1, 1, sign(det(V U^T)))
  const Svd3 svd = svd3(h);
  const Mat3 vut = mat_mul(svd.v, mat_transpose(svd.u));
  const double d = mat_det(vut) < 0.0 ? -1.0 : 1.0;
  Mat3 vd = svd.v;
  for (int r = 0; r < 3; ++r) vd[r][2] *= d;

  SimilarityTransform t;
  t.rotation = mat_mul(vd, mat_transpose(svd.u));
  t.scale = (svd.s[0] + svd.s[1] + d * svd.s[2]) / var_p;
  if (!(t.scale > 0.0)) {
    // Only reachable when pred and gt are uncorrelated; a tiny positive scale keeps the transform valid.
    t.scale = std::numeric_limits<double>::min();
  }
  for (int r = 0; r < 3; ++r) {
    t.translation[r] =
        mq[r] - t.scale * (t.rotation[r][0] * mp[0] + t.rotation[r][1] * mp[1] + t.rotation[r][2] * mp[2]);
  }
  return t;
}

double pa_mpjpe(const JointSet& pred, const JointSet& gt) {
  return mpjpe(procrustes_align(pred, gt).apply(pred), gt);
}

EvalReport evaluate(const std::vector<JointSet>& preds, const std::vector<JointSet>& gts) {
  if (preds.size() != gts.size()) {
    throw ShapeError("evaluate: " + std::to_string(preds.size()) + " predictions for " + std::to_string(gts.size()) +
                     " ground-truth samples");
  }
  EvalReport report;
  report.per_sample.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    SampleMetrics m;
    m.mpjpe = mpjpe(preds[i], gts[i]);
    m.pa_mpjpe = pa_mpjpe(preds[i], gts[i]);
    report.mpjpe_mean += m.mpjpe;
    report.pa_mpjpe_mean += m.pa_mpjpe;
    report.per_sample.push_back(m);
  }
  if (!preds.empty()) {
    report.mpjpe_mean /= static_cast<double>(preds.size());
    report.pa_mpjpe_mean /= static_cast<double>(preds.size());
  }
  return report;
}

}  // namespace hpvit
