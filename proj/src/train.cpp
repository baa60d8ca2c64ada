#include "hpvit/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "hpvit/errors.hpp"
#include "hpvit/losses.hpp"
#include "hpvit/metrics.hpp"
#include "hpvit/ops.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

TrainConfig TrainConfig::reference() {
  TrainConfig c;
  c.phase1 = {70, 5e-4, 64};
  c.phase2 = {20, 1e-4, 64};
  return c;
}

void TrainConfig::validate() const {
  for (const PhaseConfig* p : {&phase1, &phase2}) {
    if (!(p->lr > 0.0) || !std::isfinite(p->lr)) throw ConfigError("train config: lr must be positive");
    if (p->batch == 0) throw ConfigError("train config: batch must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("train config: Adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("train config: Adam eps must be positive");
  augment.validate();
  rle.validate();
}

Adam::Adam(std::vector<Tensor> params, double lr, AdamConfig cfg) : params_(std::move(params)), lr_(lr), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto data = params_[i].mutable_data();
    const auto grad = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < data.size(); ++k) {
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * grad[k];
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
      data[k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg_.eps);
    }
  }
}

double train_set_mpjpe(const std::vector<Sample>& samples, const Parameters& params, const ModelConfig& config) {
  double total = 0.0;
  for (const auto& s : samples) total += mpjpe(forward(s.image, params, config).mu_joints(), s.joints);
  return total / static_cast<double>(samples.size());
}

void fit_output_normalization(ModelConfig& config, const std::vector<Sample>& samples) {
  Vec3 mean{};
  const double n = static_cast<double>(samples.size() * kNumJoints);
  for (const auto& s : samples)
    for (const auto& j : s.joints.joints)
      for (int k = 0; k < 3; ++k) mean[k] += j[k] / n;
  double var = 0.0;
  for (const auto& s : samples)
    for (const auto& j : s.joints.joints)
      for (int k = 0; k < 3; ++k) var += (j[k] - mean[k]) * (j[k] - mean[k]) / (3.0 * n);
  config.output_offset = mean;
  config.output_scale = var > 0.0 ? std::sqrt(var) : 1.0;
}

namespace {

enum : std::uint64_t { kShuffleKey = 1, kAugmentKey = 2 };

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, std::uint64_t phase, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = Rng::stream(seed, {kShuffleKey, phase, epoch});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

void check_finite(double v, const std::string& what, const std::string& phase, std::size_t epoch) {
  if (!std::isfinite(v)) {
    throw TrainingDiverged("training diverged: " + what + " is " + std::to_string(v) + " in phase '" + phase +
                           "' epoch " + std::to_string(epoch));
  }
}

struct PhaseRun {
  std::string name;
  std::uint64_t key;
  const PhaseConfig& phase;
};

}  // namespace

Checkpoint train(const TrainConfig& cfg, ModelConfig model_cfg, const std::vector<Sample>& samples,
                 const EpochCallback& on_epoch) {
  cfg.validate();
  if (samples.empty()) throw ContractError("train: empty dataset");
  model_cfg.head_mode = HeadMode::mu_only;
  if (cfg.normalize_outputs) fit_output_normalization(model_cfg, samples);
  model_cfg.validate();

  Checkpoint ckpt{model_cfg, init_params(model_cfg, cfg.seed), std::nullopt, {}};
  ckpt.meta.seed = cfg.seed;
  auto record = [&](EpochRecord r) {
    ckpt.meta.history.push_back(r);
    if (on_epoch) on_epoch(r);
  };
  const double init_mpjpe = train_set_mpjpe(samples, ckpt.params, ckpt.config);
  check_finite(init_mpjpe, "initial train MPJPE", "init", 0);
  record({"init", 0, init_mpjpe, init_mpjpe});

  auto run_phase = [&](const PhaseRun& run) {
    const bool rle = run.name == "rle";
    std::vector<Tensor> trainable;
    ckpt.params.set_requires_grad(true);
    for (auto& [_, t] : ckpt.params) trainable.push_back(t);
    if (ckpt.flow) {
      ckpt.flow->params.set_requires_grad(true);
      for (auto& [_, t] : ckpt.flow->params) trainable.push_back(t);
    }
    Adam opt(trainable, run.phase.lr, cfg.adam);
    const std::size_t n = samples.size();
    for (std::size_t epoch = 1; epoch <= run.phase.epochs; ++epoch) {
      const auto order = shuffled(n, cfg.seed, run.key, epoch);
      double loss_sum = 0.0;
      for (std::size_t start = 0; start < n; start += run.phase.batch) {
        const std::size_t end = std::min(n, start + run.phase.batch);
        const double inv = 1.0 / static_cast<double>(end - start);
        for (auto& t : trainable) t.zero_grad();
        for (std::size_t b = start; b < end; ++b) {
          const std::size_t idx = order[b];
          Rng aug_rng = Rng::stream(cfg.seed ^ cfg.augment.seed, {kAugmentKey, run.key, epoch, idx});
          const Sample s = augment_sample(samples[idx], aug_rng, cfg.augment);
          const PosePrediction pred = forward(s.image, ckpt.params, ckpt.config);
          const Tensor loss = rle ? rle_loss(pred, s.joints, ckpt.flow ? &*ckpt.flow : nullptr, cfg.rle)
                                  : mpjpe_loss(pred, s.joints);
          check_finite(loss.item(), "loss on sample " + std::to_string(idx), run.name, epoch);
          loss_sum += loss.item();
          backward(scale(loss, inv));
        }
        for (const auto& t : trainable)
          for (double g : t.grad()) check_finite(g, "gradient", run.name, epoch);
        opt.step();
      }
      ++ckpt.meta.epochs_completed;
      const double mean_loss = loss_sum / static_cast<double>(n);
      const double train_mpjpe =
          cfg.eval_each_epoch ? train_set_mpjpe(samples, ckpt.params, ckpt.config) : -1.0;
      record({run.name, epoch, mean_loss, train_mpjpe});
    }
    ckpt.params.set_requires_grad(false);
    if (ckpt.flow) ckpt.flow->params.set_requires_grad(false);
  };

  run_phase({"mpjpe", 1, cfg.phase1});
  if (cfg.phase2.epochs > 0) {
    ckpt.config.head_mode = HeadMode::mu_sigma;
    add_sigma_branch(ckpt.params, ckpt.config, cfg.seed);
    if (cfg.rle.mode == RleMode::coupling_flow) ckpt.flow = FlowModel::init(cfg.rle, cfg.seed);
    run_phase({"rle", 2, cfg.phase2});
  }
  return ckpt;
}

}  // namespace hpvit
