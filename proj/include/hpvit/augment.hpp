#pragma once

#include <array>
#include <cstdint>
#include <functional>

#include "hpvit/joints.hpp"
#include "hpvit/model.hpp"
#include "hpvit/rng.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

struct AugmentConfig {
  double p_vflip = 0.5;
  double p_blur = 0.5;
  double p_median = 0.5;
  double p_dropout = 0.5;
  std::size_t dropout_max_holes = 4;
  double dropout_max_frac = 0.25;
  /// YOLOX defaults: hue shift (fraction of a turn), saturation and value gains.
  std::array<double, 3> hsv_gains{0.015, 0.7, 0.4};
  std::uint64_t seed = 0;

  void validate() const;
  /// Every probability and gain zero.
  static AugmentConfig none();
};

struct Sample {
  Tensor image;  // [3 x H x W], values in [0, 1]
  JointSet joints;
  /// Joints are in a camera frame whose principal point is the image centre,
  /// which is what makes the 3-D flip rule y -> -y exact.
  bool camera_normalized = true;
};

enum class BlurKind { box3, median3 };

/// Reverses image rows (top <-> bottom).
Tensor vertical_flip_image(const Tensor& image);
/// y -> -y; x and z unchanged.
JointSet vertical_flip_joints(const JointSet& joints);
Sample vertical_flip_sample(const Sample& s);

/// With probability p_dropout, fills 1..dropout_max_holes rectangles (each side
/// at most dropout_max_frac of the image side) with 0.5.
Tensor coarse_dropout(const Tensor& image, Rng& rng, const AugmentConfig& cfg);
/// 3x3 box mean or median per channel, edge-replicate padding. Needs H, W >= 3.
Tensor blur(const Tensor& image, BlurKind kind);
/// Additive hue shift (wrapping) and multiplicative saturation/value factors,
/// each drawn uniformly within +-gain, then clamped to [0, 1].
Tensor hsv_jitter(const Tensor& image, Rng& rng, const std::array<double, 3>& gains);

/// Training-time pipeline: flip, blur, median blur, dropout, HSV, each gated by its probability.
Sample augment_sample(const Sample& s, Rng& rng, const AugmentConfig& cfg);

using ForwardFn = std::function<PosePrediction(const Tensor&)>;

/// Averages forward(image) with the un-flipped forward(vflip(image)). Sigma,
/// when present, is averaged the same way (it carries no sign).
PosePrediction tta_predict(const ForwardFn& model_forward, const Tensor& image);

}  // namespace hpvit
