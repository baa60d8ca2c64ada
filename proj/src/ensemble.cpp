#include "hpvit/ensemble.hpp"

#include <cmath>

#include "hpvit/errors.hpp"
#include "hpvit/metrics.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

std::string to_string(Metric m) { return m == Metric::mpjpe ? "mpjpe" : "pa_mpjpe"; }

Metric parse_metric(const std::string& s) {
  if (s == "mpjpe") return Metric::mpjpe;
  if (s == "pa_mpjpe") return Metric::pa_mpjpe;
  throw ConfigError("unknown metric '" + s + "' (expected mpjpe|pa_mpjpe)");
}

EnsembleWeights::EnsembleWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw ContractError("ensemble weights: need at least one weight");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("ensemble weights: weights must be finite and non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw ContractError("ensemble weights: sum is " + std::to_string(total) + ", expected 1");
  }
}

EnsembleWeights EnsembleWeights::normalized(std::vector<double> raw) {
  double total = 0.0;
  for (double w : raw) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("ensemble weights: weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw ContractError("ensemble weights: all weights are zero");
  for (double& w : raw) w /= total;
  return EnsembleWeights(std::move(raw));
}

EnsembleWeights EnsembleWeights::one_hot(std::size_t count, std::size_t index) {
  if (index >= count) throw ContractError("ensemble weights: one-hot index out of range");
  std::vector<double> w(count, 0.0);
  w[index] = 1.0;
  return EnsembleWeights(std::move(w));
}

namespace {

void check_aligned(const std::vector<PredictionSet>& sets) {
  if (sets.empty()) throw ContractError("ensemble: no prediction sets");
  for (const auto& s : sets) {
    if (s.sample_ids.size() != s.predictions.size()) {
      throw AlignmentError("ensemble: model '" + s.model_id + "' has mismatched ids and predictions");
    }
    if (s.sample_ids != sets[0].sample_ids) {
      throw AlignmentError("ensemble: model '" + s.model_id + "' sample ids differ from '" + sets[0].model_id + "'");
    }
  }
}

double score(const std::vector<JointSet>& preds, const std::vector<JointSet>& gt, Metric metric) {
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    total += metric == Metric::mpjpe ? mpjpe(preds[i], gt[i]) : pa_mpjpe(preds[i], gt[i]);
  }
  return total / static_cast<double>(preds.size());
}

}  // namespace

PredictionSet fuse(const std::vector<PredictionSet>& sets, const EnsembleWeights& w) {
  check_aligned(sets);
  if (sets.size() != w.size()) {
    throw ContractError("fuse: " + std::to_string(w.size()) + " weights for " + std::to_string(sets.size()) + " models");
  }
  PredictionSet out;
  out.model_id = "ensemble";
  out.sample_ids = sets[0].sample_ids;
  out.predictions.resize(out.sample_ids.size());
  for (std::size_t i = 0; i < out.predictions.size(); ++i) {
    JointSet& f = out.predictions[i];
    for (std::size_t m = 0; m < sets.size(); ++m) {
      const JointSet& p = sets[m].predictions[i];
      for (std::size_t j = 0; j < kNumJoints; ++j)
        for (int k = 0; k < 3; ++k) f[j][k] += w[m] * p[j][k];
    }
  }
  return out;
}

double evaluate_ensemble(const std::vector<PredictionSet>& sets, const EnsembleWeights& w,
                         const std::vector<JointSet>& gt, Metric metric) {
  const PredictionSet fused = fuse(sets, w);
  if (gt.size() != fused.predictions.size()) {
    throw ContractError("evaluate_ensemble: " + std::to_string(gt.size()) + " ground-truth samples for " +
                        std::to_string(fused.predictions.size()) + " predictions");
  }
  if (gt.empty()) throw ContractError("evaluate_ensemble: empty validation set");
  return score(fused.predictions, gt, metric);
}

SearchResult random_search_weights(const std::vector<PredictionSet>& sets, const std::vector<JointSet>& gt,
                                   std::size_t trials, std::uint64_t seed, Metric metric) {
  if (trials < 1) throw ContractError("random_search_weights: trials must be >= 1");
  if (gt.empty()) throw ContractError("random_search_weights: empty validation set");
  check_aligned(sets);
  const std::size_t m = sets.size();

  SearchResult best{EnsembleWeights::one_hot(m, 0), evaluate_ensemble(sets, EnsembleWeights::one_hot(m, 0), gt, metric), 1};
  auto consider = [&](const EnsembleWeights& w) {
    const double s = evaluate_ensemble(sets, w, gt, metric);
    ++best.candidates_evaluated;
    if (s < best.best_score) {
      best.best_score = s;
      best.weights = w;
    }
  };
  for (std::size_t i = 1; i < m; ++i) consider(EnsembleWeights::one_hot(m, i));
  if (m == 1) return best;  // the simplex is a single point
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = Rng::stream(seed, {t});
    std::vector<double> raw(m);
    for (auto& r : raw) {
      double u;
      do {
        u = rng.uniform();
      } while (u <= 0.0);
      r = -std::log(u);
    }
    consider(EnsembleWeights::normalized(std::move(raw)));
  }
  return best;
}

}  // namespace hpvit
