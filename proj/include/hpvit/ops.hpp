#pragma once

#include <cstddef>
#include <vector>

#include "hpvit/tensor.hpp"

namespace hpvit {

// Binary elementwise ops. Operand shapes must match, or one operand must hold
// a single element, which is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor neg(const Tensor& a);

Tensor exp(const Tensor& a);
/// Throws DomainError on any non-positive input.
Tensor log(const Tensor& a);
/// Throws DomainError on any negative input.
Tensor sqrt(const Tensor& a);
Tensor tanh(const Tensor& a);
/// GELU, tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
double gelu_value(double x);

/// [m x k] * [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// Adds a length-n vector to every row of an [m x n] tensor.
Tensor add_row(const Tensor& a, const Tensor& row);
/// x W + b for x [m x k], W [k x n], b [n].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor softmax(const Tensor& t, std::size_t axis);
inline constexpr double kLayerNormEps = 1e-5;
/// Normalises over the last axis, then applies gain and bias (both sized like the last axis).
Tensor layer_norm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps = kLayerNormEps);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
/// Sums the last axis of a 2-D tensor: [m x n] -> [m x 1].
Tensor sum_cols(const Tensor& t);

Tensor reshape(const Tensor& t, Shape dims);
Tensor slice_cols(const Tensor& t, std::size_t start, std::size_t count);
/// Gathers columns by index (indices may repeat or reorder).
Tensor select_cols(const Tensor& t, const std::vector<std::size_t>& cols);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);

/// [C x H x W] image -> [(H/P)(W/P) x C*P*P] patch rows, raster order over the
/// patch grid; each row is channel-major then row-major within the patch.
Tensor patchify(const Tensor& image, std::size_t patch);

}  // namespace hpvit
