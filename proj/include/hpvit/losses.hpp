#pragma once

#include "hpvit/flow.hpp"
#include "hpvit/joints.hpp"
#include "hpvit/model.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

inline constexpr double kMpjpeLossEps = 1e-8;

/// Mean over joints of sqrt(sum_d (mu - gt)^2 + eps). Accepts any [J x 3] pair.
Tensor mpjpe_loss(const Tensor& mu, const Tensor& gt);
Tensor mpjpe_loss(const PosePrediction& pred, const JointSet& gt);

/// Mean over all coordinates of log sigma + (x - mu)^2 / (2 sigma^2) + 0.5 log(2 pi).
Tensor gaussian_nll(const Tensor& mu, const Tensor& sigma, const Tensor& gt);

/// Residual log-likelihood loss on xbar = (gt - mu) / sigma:
///   -log G(xbar) - log F(xbar) - log s + sum log sigma
/// per joint, normalised by the 63 coordinates so the Gaussian-only form
/// coincides with gaussian_nll. `flow` is required in coupling_flow mode.
Tensor rle_loss(const PosePrediction& pred, const JointSet& gt, const FlowModel* flow, const RleConfig& cfg);
Tensor rle_loss(const Tensor& mu, const Tensor& sigma, const Tensor& gt, const FlowModel* flow, const RleConfig& cfg);

}  // namespace hpvit
