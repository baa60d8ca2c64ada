#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hpvit/checkpoint.hpp"
#include "hpvit/dataset.hpp"
#include "hpvit/ensemble.hpp"

namespace hpvit {

struct PredictionRecord {
  std::string sample_id;
  JointSet mu;
  std::optional<JointSet> sigma;

  bool operator==(const PredictionRecord&) const = default;
};

/// Runs forward (or tta_predict) per sample in dataset order. Throws ShapeError
/// if the dataset image size differs from the checkpoint's model config.
std::vector<PredictionRecord> infer(const Checkpoint& ckpt, const Dataset& dataset, bool tta);

/// JSON lines: {"sample_id": ..., "mu": 21x3[, "sigma": 21x3]}.
std::string encode_predictions(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> decode_predictions(const std::string& text);
void write_predictions(const std::filesystem::path& path, const std::vector<PredictionRecord>& records);
/// Throws FormatError naming the offending line.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);

PredictionSet to_prediction_set(const std::string& model_id, const std::vector<PredictionRecord>& records);

}  // namespace hpvit
