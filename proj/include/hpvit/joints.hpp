#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hpvit/tensor.hpp"

namespace hpvit {

inline constexpr std::size_t kNumJoints = 21;

using Vec3 = std::array<double, 3>;

/// 21 hand joints in millimetres, ego-centric camera frame. Joint 0 is the
/// wrist; joints 1+4f .. 4+4f form finger f (thumb first), base to tip.
struct JointSet {
  std::array<Vec3, kNumJoints> joints{};

  Vec3& operator[](std::size_t i) { return joints[i]; }
  const Vec3& operator[](std::size_t i) const { return joints[i]; }
  bool operator==(const JointSet&) const = default;

  /// Throws DomainError if any coordinate is NaN or infinite.
  void validate() const;

  /// [21 x 3] constant tensor.
  Tensor to_tensor() const;
  /// Reads a [21 x 3] tensor; throws ShapeError otherwise.
  static JointSet from_tensor(const Tensor& t);
  static JointSet from_rows(const std::vector<std::vector<double>>& rows);
  std::vector<std::vector<double>> to_rows() const;
};

/// Parent joint of each joint in the kinematic tree (-1 for the wrist).
const std::array<int, kNumJoints>& joint_parents();

}  // namespace hpvit
