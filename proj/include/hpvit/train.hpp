#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hpvit/augment.hpp"
#include "hpvit/checkpoint.hpp"
#include "hpvit/flow.hpp"
#include "hpvit/model.hpp"

namespace hpvit {

struct PhaseConfig {
  std::size_t epochs = 0;
  double lr = 1e-3;
  std::size_t batch = 16;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  /// MPJPE-loss phase.
  PhaseConfig phase1{30, 1e-3, 16};
  /// RLE fine-tune phase; switches the head to mu_sigma.
  PhaseConfig phase2{10, 1e-4, 16};
  AdamConfig adam;
  std::uint64_t seed = 0;
  AugmentConfig augment;
  RleConfig rle;
  /// Standardise regression targets with training-set statistics (see ModelConfig::output_offset).
  bool normalize_outputs = true;
  /// Evaluate train MPJPE after every epoch; otherwise the history records -1.
  bool eval_each_epoch = true;

  /// Desk-scale defaults: 30 + 10 epochs, batch 16.
  static TrainConfig desk();
  /// 70 epochs at 5e-4 then 20 at 1e-4, batch 64.
  static TrainConfig reference();

  void validate() const;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, double lr, AdamConfig cfg);
  /// One update from the gradients currently stored on the parameters.
  void step();
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
};

/// Mean MPJPE (mm) of the model over the samples, no augmentation.
double train_set_mpjpe(const std::vector<Sample>& samples, const Parameters& params, const ModelConfig& config);

/// Offset = per-axis mean of all joints, scale = RMS deviation from it (mm).
void fit_output_normalization(ModelConfig& config, const std::vector<Sample>& samples);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Phase 1 minimises mpjpe_loss; phase 2 (if it has epochs) adds the sigma
/// branch at 10 mm and minimises rle_loss. Per-sample gradients are summed over
/// a batch and divided by its size. Shuffling and augmentation draw from RNG
/// streams keyed by (seed, phase, epoch[, sample]) so a run is reproducible.
/// Throws TrainingDiverged when a loss or gradient stops being finite.
Checkpoint train(const TrainConfig& cfg, ModelConfig model_cfg, const std::vector<Sample>& samples,
                 const EpochCallback& on_epoch = {});

}  // namespace hpvit
