#pragma once

#include <cstdint>
#include <vector>

#include "hpvit/model.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

enum class RleMode { gaussian_only, coupling_flow };

std::string to_string(RleMode mode);
RleMode parse_rle_mode(const std::string& s);

struct RleConfig {
  RleMode mode = RleMode::gaussian_only;
  double s = 1.0;
  std::size_t flow_layers = 4;
  std::size_t flow_hidden = 16;

  void validate() const;
};

/// Stack of affine coupling layers on per-joint 3-vectors, shared across joints.
///
/// Layer l keeps coordinate (l mod 3) fixed and transforms the other two:
///   y_b = x_b * exp(tanh(s(x_a))) + t(x_a),   y_a = x_a,
/// where s and t are one-hidden-layer tanh MLPs. log|det J| = sum tanh(s(x_a)).
struct FlowModel {
  RleConfig config;
  Parameters params;  // "flow.<l>.{scale,shift}.{fc1,fc2}.{weight,bias}"

  /// identity == true zeroes the output layers so the flow starts as the identity map.
  static FlowModel init(const RleConfig& config, std::uint64_t seed, bool identity = true);

  std::size_t conditioner(std::size_t layer) const { return layer % 3; }
};

struct FlowOutput {
  Tensor z;        // [N x 3]
  Tensor log_det;  // [N x 1]
};

FlowOutput flow_forward(const Tensor& xbar, const FlowModel& flow);
/// Analytic inverse of flow_forward (values only, no graph).
Tensor flow_inverse(const Tensor& z, const FlowModel& flow);
/// log F(x) = log N(z; 0, I) + log|det J| per row, [N x 1].
Tensor flow_log_density(const Tensor& xbar, const FlowModel& flow);

}  // namespace hpvit
