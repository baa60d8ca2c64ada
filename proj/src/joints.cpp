#include "hpvit/joints.hpp"

#include <cmath>
#include <string>

#include "hpvit/errors.hpp"

namespace hpvit {

void JointSet::validate() const {
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    for (double v : joints[j]) {
      if (!std::isfinite(v)) throw DomainError("joint set: non-finite coordinate at joint " + std::to_string(j));
    }
  }
}

Tensor JointSet::to_tensor() const {
  std::vector<double> data;
  data.reserve(kNumJoints * 3);
  for (const auto& j : joints) data.insert(data.end(), j.begin(), j.end());
  return Tensor::from({kNumJoints, 3}, std::move(data));
}

JointSet JointSet::from_tensor(const Tensor& t) {
  if (t.dims() != Shape{kNumJoints, 3}) {
    throw ShapeError("joint set: expected [21x3], got " + shape_str(t.dims()));
  }
  JointSet out;
  const auto d = t.data();
  for (std::size_t j = 0; j < kNumJoints; ++j)
    for (std::size_t k = 0; k < 3; ++k) out.joints[j][k] = d[j * 3 + k];
  return out;
}

JointSet JointSet::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.size() != kNumJoints) {
    throw ShapeError("joint set: expected 21 joints, got " + std::to_string(rows.size()));
  }
  JointSet out;
  for (std::size_t j = 0; j < kNumJoints; ++j) {
    if (rows[j].size() != 3) throw ShapeError("joint set: joint " + std::to_string(j) + " is not a 3-vector");
    for (std::size_t k = 0; k < 3; ++k) out.joints[j][k] = rows[j][k];
  }
  return out;
}

std::vector<std::vector<double>> JointSet::to_rows() const {
  std::vector<std::vector<double>> rows;
  rows.reserve(kNumJoints);
  for (const auto& j : joints) rows.emplace_back(j.begin(), j.end());
  return rows;
}

const std::array<int, kNumJoints>& joint_parents() {
  static const std::array<int, kNumJoints> parents = {
      -1,            //
      0,  1,  2,  3,   // thumb
      0,  5,  6,  7,   // index
      0,  9,  10, 11,  // middle
      0,  13, 14, 15,  // ring
      0,  17, 18, 19,  // little
  };
  return parents;
}

}  // namespace hpvit
