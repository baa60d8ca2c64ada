#include "hpvit/flow.hpp"

#include <cmath>
#include <numbers>

#include "hpvit/errors.hpp"
#include "hpvit/ops.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

std::string to_string(RleMode mode) { return mode == RleMode::gaussian_only ? "gaussian_only" : "coupling_flow"; }

RleMode parse_rle_mode(const std::string& s) {
  if (s == "gaussian_only") return RleMode::gaussian_only;
  if (s == "coupling_flow") return RleMode::coupling_flow;
  throw ConfigError("unknown rle mode '" + s + "'");
}

void RleConfig::validate() const {
  if (!(s > 0.0) || !std::isfinite(s)) throw ConfigError("rle config: s must be positive");
  if (mode == RleMode::coupling_flow && flow_layers < 1) throw ConfigError("rle config: flow_layers must be >= 1");
  if (mode == RleMode::coupling_flow && flow_hidden < 1) throw ConfigError("rle config: flow_hidden must be >= 1");
}

namespace {

std::string layer_prefix(std::size_t l) { return "flow." + std::to_string(l); }

std::vector<std::size_t> transformed_dims(std::size_t cond) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < 3; ++d)
    if (d != cond) out.push_back(d);
  return out;
}

Tensor small_mlp(const Tensor& x, const Parameters& p, const std::string& prefix) {
  Tensor h = tanh(linear(x, p.at(prefix + ".fc1.weight"), p.at(prefix + ".fc1.bias")));
  return linear(h, p.at(prefix + ".fc2.weight"), p.at(prefix + ".fc2.bias"));
}

// Reassembles columns: out[:, cond] = a, out[:, others] = b.
Tensor merge(const Tensor& a, const Tensor& b, std::size_t cond) {
  Tensor cat = concat_cols({a, b});  // columns: cond, others...
  std::vector<std::size_t> perm(3);
  const auto others = transformed_dims(cond);
  perm[cond] = 0;
  perm[others[0]] = 1;
  perm[others[1]] = 2;
  return select_cols(cat, perm);
}

}  // namespace

FlowModel FlowModel::init(const RleConfig& config, std::uint64_t seed, bool identity) {
  config.validate();
  FlowModel f;
  f.config = config;
  const std::size_t h = config.flow_hidden;
  Rng rng(seed);
  auto weights = [&rng](std::size_t n, double stddev) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.truncated_normal(0.0, stddev);
    return w;
  };
  for (std::size_t l = 0; l < config.flow_layers; ++l) {
    for (const char* net : {"scale", "shift"}) {
      const std::string p = layer_prefix(l) + "." + net;
      f.params.insert(p + ".fc1.weight", Tensor::from({1, h}, weights(h, 0.5)));
      f.params.insert(p + ".fc1.bias", Tensor::from({h}, weights(h, 0.1)));
      f.params.insert(p + ".fc2.weight",
                      identity ? Tensor::zeros({h, 2}) : Tensor::from({h, 2}, weights(2 * h, 0.3)));
      f.params.insert(p + ".fc2.bias", identity ? Tensor::zeros({2}) : Tensor::from({2}, weights(2, 0.1)));
    }
  }
  return f;
}

FlowOutput flow_forward(const Tensor& xbar, const FlowModel& flow) {
  if (xbar.ndim() != 2 || xbar.dim(1) != 3) throw ShapeError("flow_forward: expected [N x 3], got " + shape_str(xbar.dims()));
  Tensor x = xbar;
  Tensor log_det;
  for (std::size_t l = 0; l < flow.config.flow_layers; ++l) {
    const std::size_t cond = flow.conditioner(l);
    const std::string p = layer_prefix(l);
    Tensor xa = select_cols(x, {cond});
    Tensor xb = select_cols(x, transformed_dims(cond));
    Tensor s = tanh(small_mlp(xa, flow.params, p + ".scale"));
    Tensor t = small_mlp(xa, flow.params, p + ".shift");
    Tensor yb = add(mul(xb, exp(s)), t);
    x = merge(xa, yb, cond);
    Tensor ld = sum_cols(s);
    log_det = log_det.defined() ? add(log_det, ld) : ld;
  }
  if (!log_det.defined()) log_det = Tensor::zeros({xbar.dim(0), 1});
  return {x, log_det};
}

Tensor flow_inverse(const Tensor& z, const FlowModel& flow) {
  if (z.ndim() != 2 || z.dim(1) != 3) throw ShapeError("flow_inverse: expected [N x 3], got " + shape_str(z.dims()));
  Tensor y = z.detach();
  for (std::size_t l = flow.config.flow_layers; l-- > 0;) {
    const std::size_t cond = flow.conditioner(l);
    const std::string p = layer_prefix(l);
    Tensor ya = select_cols(y, {cond});
    Tensor yb = select_cols(y, transformed_dims(cond));
    Tensor s = tanh(small_mlp(ya, flow.params, p + ".scale"));
    Tensor t = small_mlp(ya, flow.params, p + ".shift");
    Tensor xb = mul(sub(yb, t), exp(neg(s)));
    y = merge(ya, xb, cond).detach();
  }
  return y;
}

Tensor flow_log_density(const Tensor& xbar, const FlowModel& flow) {
  FlowOutput f = flow_forward(xbar, flow);
  // log N(z; 0, I) in 3-D = -0.5 |z|^2 - 1.5 log(2 pi)
  Tensor base = add_scalar(scale(sum_cols(mul(f.z, f.z)), -0.5), -1.5 * std::log(2.0 * std::numbers::pi));
  return add(base, f.log_det);
}

}  // namespace hpvit
