#include "hpvit/svd3.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace hpvit {

Mat3 mat_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

Mat3 mat_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Mat3 mat_transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  return t;
}

double mat_det(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

SymEigen3 jacobi_eigen3(const Mat3& input, int max_sweeps, double threshold) {
  Mat3 a = input;
  Mat3 v = mat_identity();
  SymEigen3 out;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double frob2 = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) frob2 += a[i][j] * a[i][j];
    const double off2 = 2.0 * (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]);
    if (off2 == 0.0 || off2 <= threshold * threshold * frob2) break;
    out.sweeps = sweep + 1;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        a[p][p] -= t * apq;
        a[q][q] += t * apq;
        a[p][q] = a[q][p] = 0.0;
        for (int r = 0; r < 3; ++r) {
          if (r == p || r == q) continue;
          const double g = a[r][p];
          const double h = a[r][q];
          a[r][p] = a[p][r] = g - s * (h + g * tau);
          a[r][q] = a[q][r] = h + s * (g - h * tau);
        }
        for (int r = 0; r < 3; ++r) {
          const double g = v[r][p];
          const double h = v[r][q];
          v[r][p] = g - s * (h + g * tau);
          v[r][q] = h + s * (g - h * tau);
        }
      }
    }
  }
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int i, int j) { return a[i][i] > a[j][j]; });
  for (int k = 0; k < 3; ++k) {
    out.values[k] = a[order[k]][order[k]];
    for (int r = 0; r < 3; ++r) out.vectors[r][k] = v[r][order[k]];
  }
  return out;
}

namespace {

using V3 = std::array<double, 3>;

double dot(const V3& a, const V3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
V3 cross(const V3& a, const V3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
V3 scaled(const V3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
V3 minus(const V3& a, const V3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double norm(const V3& a) { return std::sqrt(dot(a, a)); }

V3 column(const Mat3& m, int c) { return {m[0][c], m[1][c], m[2][c]}; }
void set_column(Mat3& m, int c, const V3& x) {
  for (int r = 0; r < 3; ++r) m[r][c] = x[r];
}
V3 mat_vec(const Mat3& m, const V3& x) {
  return {dot(m[0], x), dot(m[1], x), dot(m[2], x)};
}

// Unit vector orthogonal to a (a assumed unit length).
V3 any_orthogonal(const V3& a) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(a[i]) < std::abs(a[k])) k = i;
  V3 e{0, 0, 0};
  e[k] = 1.0;
  V3 w = minus(e, scaled(a, dot(a, e)));
  return scaled(w, 1.0 / norm(w));
}

}  // namespace

Svd3 svd3(const Mat3& m) {
  const SymEigen3 eig = jacobi_eigen3(mat_mul(mat_transpose(m), m));
  Svd3 out;
  out.v = eig.vectors;
  V3 mv[3];
  for (int i = 0; i < 3; ++i) mv[i] = mat_vec(m, column(out.v, i));

  const double s1 = norm(mv[0]);
  if (!(s1 > 0.0)) {
    out.u = mat_identity();
    out.s = {0.0, 0.0, 0.0};
    return out;
  }
  V3 u1 = scaled(mv[0], 1.0 / s1);

  V3 w = mv[1];
  for (int pass = 0; pass < 2; ++pass) w = minus(w, scaled(u1, dot(u1, w)));
  // A residual at rounding level carries no direction.
  const double n2 = norm(w);
  V3 u2 = n2 > 1e-13 * s1 ? scaled(w, 1.0 / n2) : any_orthogonal(u1);
  double s2 = dot(u2, mv[1]);
  if (s2 < 0.0) {
    u2 = scaled(u2, -1.0);
    s2 = -s2;
  }

  V3 u3 = cross(u1, u2);
  double s3 = dot(u3, mv[2]);
  if (s3 < 0.0) {
    u3 = scaled(u3, -1.0);
    s3 = -s3;
  }

  set_column(out.u, 0, u1);
  set_column(out.u, 1, u2);
  set_column(out.u, 2, u3);
  out.s = {s1, s2, s3};

  // Rounding can leave near-equal values out of order; keep them descending.
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2 - i; ++j) {
      if (out.s[j] < out.s[j + 1]) {
        std::swap(out.s[j], out.s[j + 1]);
        for (int r = 0; r < 3; ++r) {
          std::swap(out.u[r][j], out.u[r][j + 1]);
          std::swap(out.v[r][j], out.v[r][j + 1]);
        }
      }
    }
  }
  return out;
}

}  // namespace hpvit
