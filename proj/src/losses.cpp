#include "hpvit/losses.hpp"

#include <cmath>
#include <numbers>

#include "hpvit/errors.hpp"
#include "hpvit/ops.hpp"

namespace hpvit {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void require_joint_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (a.ndim() != 2 || a.dim(1) != 3 || a.dims() != b.dims()) {
    throw ShapeError(std::string(op) + ": expected matching [J x 3] tensors, got " + shape_str(a.dims()) + " and " +
                     shape_str(b.dims()));
  }
}

void require_positive(const Tensor& sigma, const char* op) {
  for (double s : sigma.data()) {
    if (!(s > 0.0)) throw DomainError(std::string(op) + ": sigma must be strictly positive");
  }
}

}  // namespace

Tensor mpjpe_loss(const Tensor& mu, const Tensor& gt) {
  require_joint_pair(mu, gt, "mpjpe_loss");
  Tensor diff = sub(mu, gt);
  Tensor dist = sqrt(add_scalar(sum_cols(mul(diff, diff)), kMpjpeLossEps));
  return mean(dist);
}

Tensor mpjpe_loss(const PosePrediction& pred, const JointSet& gt) {
  if (pred.mu.dims() != Shape{kNumJoints, 3}) throw ShapeError("mpjpe_loss: prediction must have 21 joints");
  return mpjpe_loss(pred.mu, gt.to_tensor());
}

Tensor gaussian_nll(const Tensor& mu, const Tensor& sigma, const Tensor& gt) {
  require_joint_pair(mu, gt, "gaussian_nll");
  require_joint_pair(mu, sigma, "gaussian_nll");
  require_positive(sigma, "gaussian_nll");
  Tensor z = div(sub(gt, mu), sigma);
  Tensor per_coord = add(log(sigma), add_scalar(scale(mul(z, z), 0.5), kHalfLog2Pi));
  return mean(per_coord);
}

Tensor rle_loss(const Tensor& mu, const Tensor& sigma, const Tensor& gt, const FlowModel* flow, const RleConfig& cfg) {
  cfg.validate();
  require_joint_pair(mu, gt, "rle_loss");
  require_joint_pair(mu, sigma, "rle_loss");
  require_positive(sigma, "rle_loss");
  const double coords = static_cast<double>(mu.numel());

  Tensor xbar = div(sub(gt, mu), sigma);
  // -log G: standard normal on each coordinate
  Tensor neg_log_g = add_scalar(scale(mul(xbar, xbar), 0.5), kHalfLog2Pi);
  Tensor total = add(sum(neg_log_g), sum(log(sigma)));
  if (cfg.mode == RleMode::coupling_flow) {
    if (flow == nullptr) throw ContractError("rle_loss: coupling_flow mode needs a flow model");
    total = sub(total, sum(flow_log_density(xbar, *flow)));
  }
  const double rows = static_cast<double>(mu.dim(0));
  total = add_scalar(total, -rows * std::log(cfg.s));
  return scale(total, 1.0 / coords);
}

Tensor rle_loss(const PosePrediction& pred, const JointSet& gt, const FlowModel* flow, const RleConfig& cfg) {
  if (!pred.sigma) throw ContractError("rle_loss: prediction has no sigma (head_mode must be mu_sigma)");
  if (pred.mu.dims() != Shape{kNumJoints, 3}) throw ShapeError("rle_loss: prediction must have 21 joints");
  return rle_loss(pred.mu, *pred.sigma, gt.to_tensor(), flow, cfg);
}

}  // namespace hpvit
