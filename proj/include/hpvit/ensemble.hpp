#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hpvit/joints.hpp"

namespace hpvit {

enum class Metric { mpjpe, pa_mpjpe };

std::string to_string(Metric m);
Metric parse_metric(const std::string& s);

/// Non-negative per-model fusion weights summing to one (within 1e-12).
class EnsembleWeights {
 public:
  /// Validates as-is; throws ContractError on negative entries or a bad sum.
  explicit EnsembleWeights(std::vector<double> weights);
  /// Divides by the sum first.
  static EnsembleWeights normalized(std::vector<double> raw);
  static EnsembleWeights one_hot(std::size_t count, std::size_t index);

  const std::vector<double>& values() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

 private:
  std::vector<double> weights_;
};

struct PredictionSet {
  std::string model_id;
  std::vector<std::string> sample_ids;
  std::vector<JointSet> predictions;
};

/// Coordinate-wise weighted average. Throws AlignmentError if sample ids
/// differ between sets and ContractError on a weight-count mismatch.
PredictionSet fuse(const std::vector<PredictionSet>& sets, const EnsembleWeights& w);

double evaluate_ensemble(const std::vector<PredictionSet>& sets, const EnsembleWeights& w,
                         const std::vector<JointSet>& gt, Metric metric);

struct SearchResult {
  EnsembleWeights weights;
  double best_score;
  std::size_t candidates_evaluated;
};

/// Evaluates every one-hot vector, then `trials` points drawn uniformly from
/// the simplex (normalised exponentials, one RNG stream per trial index), and
/// returns the lowest-scoring candidate. Ties keep the earliest candidate.
SearchResult random_search_weights(const std::vector<PredictionSet>& sets, const std::vector<JointSet>& gt,
                                   std::size_t trials, std::uint64_t seed, Metric metric);

}  // namespace hpvit
