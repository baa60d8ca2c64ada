#pragma once

#include <array>

namespace hpvit {

using Mat3 = std::array<std::array<double, 3>, 3>;  // row-major, m[row][col]

struct Svd3 {
  Mat3 u{};
  std::array<double, 3> s{};  // descending, non-negative
  Mat3 v{};
};

/// m = U diag(S) V^T. V comes from a cyclic Jacobi eigen-decomposition of
/// m^T m (at most 30 sweeps, off-diagonal threshold 1e-12 relative to the
/// Frobenius norm); U is rebuilt from m V and completed to a right-handed
/// orthonormal basis, so rank-deficient inputs are handled.
Svd3 svd3(const Mat3& m);

struct SymEigen3 {
  std::array<double, 3> values{};  // descending
  Mat3 vectors{};                  // columns are eigenvectors
  int sweeps = 0;
};

/// Cyclic Jacobi on a symmetric 3x3 matrix.
SymEigen3 jacobi_eigen3(const Mat3& a, int max_sweeps = 30, double threshold = 1e-12);

Mat3 mat_mul(const Mat3& a, const Mat3& b);
Mat3 mat_transpose(const Mat3& a);
double mat_det(const Mat3& a);
Mat3 mat_identity();

}  // namespace hpvit
