#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "hpvit/joints.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

inline constexpr std::size_t kNumBones = kNumJoints - 1;

/// Bone b connects joint_parents()[b + 1] to joint b + 1 (mm).
std::array<double, kNumBones> default_bone_lengths();

struct SyntheticConfig {
  std::size_t num_samples = 64;
  std::size_t image_size = 64;
  std::uint64_t seed = 0;
  std::array<double, kNumBones> bone_lengths = default_bone_lengths();
  /// Per-sample Gaussian jitter of every bone length (mm).
  double noise_std = 2.0;
  /// Pixels; 0 selects 1.25 * image_size.
  double focal = 0.0;

  void validate() const;
  double effective_focal() const { return focal > 0.0 ? focal : 1.25 * static_cast<double>(image_size); }
};

/// Pinhole camera with its principal point at the image centre. Pixel (row r,
/// col c) covers [c, c+1) x [r, r+1), so its centre is at (c + 0.5, r + 0.5).
struct Camera {
  double focal = 80.0;
  std::size_t image_size = 64;

  /// (u, v) in pixels; throws DomainError if z <= 0.
  std::array<double, 2> project(const Vec3& p) const;
};

/// Random articulated hand in the camera frame, depth roughly 380..460 mm.
JointSet sample_hand(const SyntheticConfig& cfg, std::size_t index);

struct RenderOptions {
  bool bones = true;
  bool blobs = true;
  /// Draw only this joint's blob (for projection checks).
  std::optional<std::size_t> only_joint;
};

/// [3 x S x S] image in [0, 1]: anti-aliased bone segments and Gaussian joint
/// blobs, coloured per finger, brighter when closer, combined with max.
Tensor render_hand(const JointSet& joints, const Camera& camera, const RenderOptions& options = {});

/// Writes `<dir>/manifest.json` and `<dir>/images/<id>.tnsr`. Ids are "s00000", "s00001", ...
void synth_generate(const SyntheticConfig& cfg, const std::filesystem::path& dir);

}  // namespace hpvit
