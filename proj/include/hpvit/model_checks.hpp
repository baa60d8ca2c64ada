#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpvit/gradcheck.hpp"
#include "hpvit/model.hpp"

namespace hpvit {

struct NamedReport {
  std::string name;
  GradReport report;
};

/// Finite-difference checks of the full model on one random image: forward +
/// MPJPE loss, forward + RLE loss (Gaussian only) and forward + RLE loss with a
/// randomly initialised coupling flow. Targets are O(1) with unit output scale,
/// and parameters are redrawn at fan-in scale so every gradient is well above
/// finite-difference roundoff.
std::vector<NamedReport> run_model_gradchecks(const ModelConfig& config, std::uint64_t seed,
                                              const GradCheckOptions& options = {});

}  // namespace hpvit
