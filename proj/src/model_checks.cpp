#include "hpvit/model_checks.hpp"

#include <cmath>

#include "hpvit/flow.hpp"
#include "hpvit/losses.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

namespace {

std::vector<NamedTensor> named(const Parameters& params) {
  std::vector<NamedTensor> out;
  for (const auto& [name, t] : params) out.push_back({name, t});
  return out;
}

// Init-scale weights give attention gradients near 1e-8, below what central
// differences at h = 1e-5 resolve. Checks run at a draw with O(1) activations.
void condition(Parameters& params, Rng& rng) {
  auto ends_with = [](const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  for (auto& [name, t] : params) {
    auto data = t.mutable_data();
    double mean = 0.0, sd = 0.5;
    if (ends_with(name, ".gain")) {
      mean = 1.0;
      sd = 0.1;
    } else if (ends_with(name, ".bias")) {
      sd = 0.1;
    } else if (ends_with(name, ".weight")) {
      sd = 1.0 / std::sqrt(static_cast<double>(t.dim(0)));
    }
    for (double& v : data) v = rng.normal(mean, sd);
  }
}

}  // namespace

std::vector<NamedReport> run_model_gradchecks(const ModelConfig& config, std::uint64_t seed,
                                              const GradCheckOptions& options) {
  ModelConfig cfg = config;
  cfg.output_offset = {0.0, 0.0, 0.0};
  cfg.output_scale = 1.0;

  Rng rng = Rng::stream(seed, {0x6772});
  std::vector<double> pixels(3 * cfg.image_size * cfg.image_size);
  for (double& v : pixels) v = rng.uniform();
  const Tensor image = Tensor::from({3, cfg.image_size, cfg.image_size}, std::move(pixels));
  std::vector<double> target(kNumJoints * 3);
  for (double& v : target) v = rng.normal();
  const Tensor gt = Tensor::from({kNumJoints, 3}, std::move(target));

  std::vector<NamedReport> out;

  cfg.head_mode = HeadMode::mu_only;
  Parameters mu_params = init_params(cfg, seed);
  condition(mu_params, rng);
  mu_params.set_requires_grad(true);
  out.push_back({"forward+mpjpe",
                 grad_check([&] { return mpjpe_loss(forward(image, mu_params, cfg).mu, gt); }, named(mu_params),
                            options)});

  cfg.head_mode = HeadMode::mu_sigma;
  Parameters params = init_params(cfg, seed);
  condition(params, rng);
  params.set_requires_grad(true);
  const RleConfig gauss{RleMode::gaussian_only};
  out.push_back({"forward+rle(gaussian_only)", grad_check(
                                                   [&] {
                                                     const PosePrediction p = forward(image, params, cfg);
                                                     return rle_loss(p.mu, *p.sigma, gt, nullptr, gauss);
                                                   },
                                                   named(params), options)});

  const RleConfig flow_cfg{RleMode::coupling_flow};
  FlowModel flow = FlowModel::init(flow_cfg, seed, /*identity=*/false);
  flow.params.set_requires_grad(true);
  auto all = named(params);
  for (auto& nt : named(flow.params)) all.push_back(std::move(nt));
  out.push_back({"forward+rle(coupling_flow)", grad_check(
                                                   [&] {
                                                     const PosePrediction p = forward(image, params, cfg);
                                                     return rle_loss(p.mu, *p.sigma, gt, &flow, flow_cfg);
                                                   },
                                                   all, options)});
  return out;
}

}  // namespace hpvit
