#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpvit/joints.hpp"
#include "hpvit/tensor.hpp"

namespace hpvit {

enum class HeadMode { mu_only, mu_sigma };
enum class Variant { tiny, base, large, huge };

std::string to_string(HeadMode mode);
std::string to_string(Variant variant);
HeadMode parse_head_mode(const std::string& s);
Variant parse_variant(const std::string& s);

struct ModelConfig {
  Variant variant = Variant::tiny;
  std::size_t image_size = 64;
  std::size_t patch_size = 16;
  std::size_t embed_dim = 64;
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t decoder_depth = 2;
  double mlp_ratio = 4.0;
  HeadMode head_mode = HeadMode::mu_only;
  /// Regression outputs are de-standardised as mu = offset + scale * raw (mm).
  Vec3 output_offset{0.0, 0.0, 0.0};
  double output_scale = 1.0;

  /// Standard ViT family dimensions; tiny is the desk-scale profile.
  static ModelConfig preset(Variant variant);

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  std::size_t num_tokens() const { return (image_size / patch_size) * (image_size / patch_size); }
  std::size_t mlp_hidden() const;
  std::size_t head_dim() const { return embed_dim / heads; }

  bool operator==(const ModelConfig&) const = default;
};

/// Name -> tensor map; ordered so iteration (and serialisation) is deterministic.
class Parameters {
 public:
  void insert(const std::string& name, Tensor t);
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  std::size_t size() const { return tensors_.size(); }
  /// Total number of scalar entries.
  std::size_t count() const;
  void set_requires_grad(bool on);
  void zero_grad();
  /// Independent copy of every tensor.
  Parameters clone() const;

  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }

 private:
  std::map<std::string, Tensor> tensors_;
};

struct PosePrediction {
  Tensor mu;                    // [21 x 3], mm
  std::optional<Tensor> sigma;  // [21 x 3], strictly positive

  JointSet mu_joints() const { return JointSet::from_tensor(mu); }
  std::optional<JointSet> sigma_joints() const;
};

/// Every parameter the config requires, with its shape, in canonical order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config);

/// Linear weights ~ truncated normal(0, 0.02), biases 0, layer-norm gains 1,
/// joint queries ~ normal(0, 0.02). Each tensor draws from its own stream
/// keyed by (seed, name), so adding a branch never perturbs existing tensors.
Parameters init_params(const ModelConfig& config, std::uint64_t seed);

/// Adds the sigma regression branch; its output bias starts at sigma = initial_sigma_mm.
void add_sigma_branch(Parameters& params, const ModelConfig& config, std::uint64_t seed,
                      double initial_sigma_mm = 10.0);

Tensor patch_embed(const Tensor& image, const Parameters& params, const ModelConfig& config);
Tensor encode(const Tensor& tokens, const Parameters& params, const ModelConfig& config);
Tensor decode_joints(const Tensor& features, const Parameters& params, const ModelConfig& config);
PosePrediction regress_head(const Tensor& joint_embeddings, const Parameters& params, const ModelConfig& config);

PosePrediction forward(const Tensor& image, const Parameters& params, const ModelConfig& config);
std::vector<PosePrediction> forward_batch(std::span<const Tensor> images, const Parameters& params,
                                          const ModelConfig& config);

/// Scaled dot-product attention split over `heads` column groups.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);

}  // namespace hpvit
