#include "hpvit/model.hpp"

#include <cmath>

#include "hpvit/errors.hpp"
#include "hpvit/ops.hpp"
#include "hpvit/rng.hpp"

namespace hpvit {

std::string to_string(HeadMode mode) { return mode == HeadMode::mu_only ? "mu_only" : "mu_sigma"; }

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::tiny: return "tiny";
    case Variant::base: return "base";
    case Variant::large: return "large";
    case Variant::huge: return "huge";
  }
  return "tiny";
}

HeadMode parse_head_mode(const std::string& s) {
  if (s == "mu_only") return HeadMode::mu_only;
  if (s == "mu_sigma") return HeadMode::mu_sigma;
  throw ConfigError("unknown head mode '" + s + "'");
}

Variant parse_variant(const std::string& s) {
  if (s == "tiny") return Variant::tiny;
  if (s == "base") return Variant::base;
  if (s == "large") return Variant::large;
  if (s == "huge") return Variant::huge;
  throw ConfigError("unknown variant '" + s + "' (expected tiny|base|large|huge)");
}

ModelConfig ModelConfig::preset(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  switch (variant) {
    case Variant::tiny:
      break;
    case Variant::base:
      c.image_size = 224, c.embed_dim = 768, c.depth = 12, c.heads = 12, c.decoder_depth = 6;
      break;
    case Variant::large:
      c.image_size = 224, c.embed_dim = 1024, c.depth = 24, c.heads = 16, c.decoder_depth = 6;
      break;
    case Variant::huge:
      c.image_size = 224, c.embed_dim = 1280, c.depth = 32, c.heads = 16, c.decoder_depth = 6;
      break;
  }
  return c;
}

std::size_t ModelConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(embed_dim) * mlp_ratio));
}

void ModelConfig::validate() const {
  if (patch_size == 0 || image_size == 0) throw ConfigError("model config: image and patch size must be positive");
  if (image_size % patch_size != 0) {
    throw ConfigError("model config: image_size " + std::to_string(image_size) + " not divisible by patch_size " +
                      std::to_string(patch_size));
  }
  if (embed_dim == 0 || heads == 0) throw ConfigError("model config: embed_dim and heads must be positive");
  if (embed_dim % heads != 0) {
    throw ConfigError("model config: embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  if (!(mlp_ratio > 0.0) || mlp_hidden() == 0) throw ConfigError("model config: mlp_ratio must be positive");
  if (!(output_scale > 0.0) || !std::isfinite(output_scale)) throw ConfigError("model config: output_scale must be positive");
  for (double v : output_offset) {
    if (!std::isfinite(v)) throw ConfigError("model config: output_offset must be finite");
  }
}

void Parameters::insert(const std::string& name, Tensor t) {
  if (!tensors_.emplace(name, std::move(t)).second) throw ContractError("parameters: duplicate name '" + name + "'");
}

const Tensor& Parameters::at(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("parameters: missing '" + name + "'");
  return it->second;
}

Tensor& Parameters::at(const std::string& name) {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("parameters: missing '" + name + "'");
  return it->second;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : tensors_) n += t.numel();
  return n;
}

void Parameters::set_requires_grad(bool on) {
  for (auto& [_, t] : tensors_) t.set_requires_grad(on);
}

void Parameters::zero_grad() {
  for (auto& [_, t] : tensors_) t.zero_grad();
}

Parameters Parameters::clone() const {
  Parameters out;
  for (const auto& [name, t] : tensors_) out.insert(name, t.detach(t.requires_grad()));
  return out;
}

std::optional<JointSet> PosePrediction::sigma_joints() const {
  if (!sigma) return std::nullopt;
  return JointSet::from_tensor(*sigma);
}

namespace {

enum class InitKind { weight, bias, gain, query };

struct ParamSpec {
  std::string name;
  Shape dims;
  InitKind kind;
};

void push_linear(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t in, std::size_t outd) {
  out.push_back({prefix + ".weight", {in, outd}, InitKind::weight});
  out.push_back({prefix + ".bias", {outd}, InitKind::bias});
}

void push_norm(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t d) {
  out.push_back({prefix + ".gain", {d}, InitKind::gain});
  out.push_back({prefix + ".bias", {d}, InitKind::bias});
}

void push_mlp(std::vector<ParamSpec>& out, const std::string& prefix, std::size_t d, std::size_t hidden) {
  push_linear(out, prefix + ".fc1", d, hidden);
  push_linear(out, prefix + ".fc2", hidden, d);
}

std::vector<ParamSpec> sigma_branch_specs(const ModelConfig& c) {
  std::vector<ParamSpec> s;
  push_linear(s, "head.sigma_fc1", c.embed_dim, c.embed_dim);
  push_linear(s, "head.sigma_fc2", c.embed_dim, 3);
  return s;
}

std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  c.validate();
  const std::size_t d = c.embed_dim;
  const std::size_t hidden = c.mlp_hidden();
  std::vector<ParamSpec> s;
  push_linear(s, "patch_embed", 3 * c.patch_size * c.patch_size, d);
  s.push_back({"pos_embed", {c.num_tokens(), d}, InitKind::weight});
  for (std::size_t i = 0; i < c.depth; ++i) {
    const std::string p = "encoder." + std::to_string(i);
    push_norm(s, p + ".norm1", d);
    push_linear(s, p + ".attn.qkv", d, 3 * d);
    push_linear(s, p + ".attn.proj", d, d);
    push_norm(s, p + ".norm2", d);
    push_mlp(s, p + ".mlp", d, hidden);
  }
  push_norm(s, "decoder.memory_norm", d);
  s.push_back({"decoder.queries", {kNumJoints, d}, InitKind::query});
  for (std::size_t i = 0; i < c.decoder_depth; ++i) {
    const std::string p = "decoder." + std::to_string(i);
    push_norm(s, p + ".norm1", d);
    push_linear(s, p + ".self_attn.qkv", d, 3 * d);
    push_linear(s, p + ".self_attn.proj", d, d);
    push_norm(s, p + ".norm2", d);
    push_linear(s, p + ".cross_attn.q", d, d);
    push_linear(s, p + ".cross_attn.kv", d, 2 * d);
    push_linear(s, p + ".cross_attn.proj", d, d);
    push_norm(s, p + ".norm3", d);
    push_mlp(s, p + ".mlp", d, hidden);
  }
  push_norm(s, "head.norm", d);
  push_linear(s, "head.fc1", d, d);
  push_linear(s, "head.fc2", d, 3);
  if (c.head_mode == HeadMode::mu_sigma) {
    auto sig = sigma_branch_specs(c);
    s.insert(s.end(), sig.begin(), sig.end());
  }
  return s;
}

std::uint64_t name_key(const std::string& name) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

Tensor init_tensor(const ParamSpec& spec, std::uint64_t seed) {
  const std::size_t n = shape_numel(spec.dims);
  std::vector<double> data(n, 0.0);
  Rng rng = Rng::stream(seed, {name_key(spec.name)});
  switch (spec.kind) {
    case InitKind::weight:
      for (auto& v : data) v = rng.truncated_normal(0.0, 0.02);
      break;
    case InitKind::query:
      for (auto& v : data) v = rng.normal(0.0, 0.02);
      break;
    case InitKind::gain:
      std::fill(data.begin(), data.end(), 1.0);
      break;
    case InitKind::bias:
      break;
  }
  return Tensor::from(spec.dims, std::move(data));
}

const std::string kSigmaBias = "head.sigma_fc2.bias";

}  // namespace

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& config) {
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& s : param_specs(config)) out.emplace_back(s.name, s.dims);
  return out;
}

Parameters init_params(const ModelConfig& config, std::uint64_t seed) {
  Parameters p;
  for (const auto& spec : param_specs(config)) {
    if (spec.name == kSigmaBias) continue;
    p.insert(spec.name, init_tensor(spec, seed));
  }
  if (config.head_mode == HeadMode::mu_sigma) {
    p.insert(kSigmaBias, Tensor::full({3}, std::log(10.0 / config.output_scale)));
  }
  return p;
}

void add_sigma_branch(Parameters& params, const ModelConfig& config, std::uint64_t seed, double initial_sigma_mm) {
  if (!(initial_sigma_mm > 0.0)) throw ConfigError("add_sigma_branch: initial sigma must be positive");
  const bool grad = params.size() > 0 && params.begin()->second.requires_grad();
  for (const auto& spec : sigma_branch_specs(config)) {
    Tensor t = spec.name == kSigmaBias ? Tensor::full({3}, std::log(initial_sigma_mm / config.output_scale))
                                       : init_tensor(spec, seed);
    t.set_requires_grad(grad);
    params.insert(spec.name, std::move(t));
  }
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads) {
  const std::size_t d = q.dim(1);
  if (heads == 0 || d % heads != 0 || k.dim(1) != d || v.dim(1) != d) {
    throw ShapeError("attention: width " + std::to_string(d) + " incompatible with " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor attn = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
    outs.push_back(matmul(attn, vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

namespace {

Tensor lin(const Tensor& x, const Parameters& p, const std::string& prefix) {
  return linear(x, p.at(prefix + ".weight"), p.at(prefix + ".bias"));
}

Tensor norm(const Tensor& x, const Parameters& p, const std::string& prefix) {
  return layer_norm(x, p.at(prefix + ".gain"), p.at(prefix + ".bias"));
}

Tensor mlp(const Tensor& x, const Parameters& p, const std::string& prefix) {
  return lin(gelu(lin(x, p, prefix + ".fc1")), p, prefix + ".fc2");
}

Tensor self_attention(const Tensor& x, const Parameters& p, const std::string& prefix, std::size_t heads) {
  const std::size_t d = x.dim(1);
  Tensor qkv = lin(x, p, prefix + ".qkv");
  Tensor out = multi_head_attention(slice_cols(qkv, 0, d), slice_cols(qkv, d, d), slice_cols(qkv, 2 * d, d), heads);
  return lin(out, p, prefix + ".proj");
}

}  // namespace

Tensor patch_embed(const Tensor& image, const Parameters& params, const ModelConfig& config) {
  const Shape expected{3, config.image_size, config.image_size};
  if (image.dims() != expected) {
    throw ShapeError("patch_embed: image " + shape_str(image.dims()) + " does not match config " + shape_str(expected));
  }
  Tensor tokens = lin(patchify(image, config.patch_size), params, "patch_embed");
  return add(tokens, params.at("pos_embed"));
}

Tensor encode(const Tensor& tokens, const Parameters& params, const ModelConfig& config) {
  Tensor x = tokens;
  for (std::size_t i = 0; i < config.depth; ++i) {
    const std::string p = "encoder." + std::to_string(i);
    x = add(x, self_attention(norm(x, params, p + ".norm1"), params, p + ".attn", config.heads));
    x = add(x, mlp(norm(x, params, p + ".norm2"), params, p + ".mlp"));
  }
  return x;
}

Tensor decode_joints(const Tensor& features, const Parameters& params, const ModelConfig& config) {
  Tensor q = params.at("decoder.queries");
  if (config.decoder_depth == 0) return q;
  const std::size_t d = config.embed_dim;
  Tensor memory = norm(features, params, "decoder.memory_norm");
  for (std::size_t i = 0; i < config.decoder_depth; ++i) {
    const std::string p = "decoder." + std::to_string(i);
    q = add(q, self_attention(norm(q, params, p + ".norm1"), params, p + ".self_attn", config.heads));

    Tensor cq = lin(norm(q, params, p + ".norm2"), params, p + ".cross_attn.q");
    Tensor kv = lin(memory, params, p + ".cross_attn.kv");
    Tensor cross = multi_head_attention(cq, slice_cols(kv, 0, d), slice_cols(kv, d, d), config.heads);
    q = add(q, lin(cross, params, p + ".cross_attn.proj"));

    q = add(q, mlp(norm(q, params, p + ".norm3"), params, p + ".mlp"));
  }
  return q;
}

PosePrediction regress_head(const Tensor& joint_embeddings, const Parameters& params, const ModelConfig& config) {
  if (joint_embeddings.dims() != Shape{kNumJoints, config.embed_dim}) {
    throw ShapeError("regress_head: expected [21x" + std::to_string(config.embed_dim) + "], got " +
                     shape_str(joint_embeddings.dims()));
  }
  Tensor h = norm(joint_embeddings, params, "head.norm");
  Tensor raw = lin(gelu(lin(h, params, "head.fc1")), params, "head.fc2");
  const Tensor offset = Tensor::from({3}, {config.output_offset[0], config.output_offset[1], config.output_offset[2]});
  PosePrediction out;
  out.mu = add_row(scale(raw, config.output_scale), offset);
  if (config.head_mode == HeadMode::mu_sigma) {
    Tensor raw_sigma = lin(gelu(lin(h, params, "head.sigma_fc1")), params, "head.sigma_fc2");
    out.sigma = scale(exp(raw_sigma), config.output_scale);
  }
  return out;
}

PosePrediction forward(const Tensor& image, const Parameters& params, const ModelConfig& config) {
  Tensor tokens = patch_embed(image, params, config);
  Tensor features = encode(tokens, params, config);
  Tensor joints = decode_joints(features, params, config);
  return regress_head(joints, params, config);
}

std::vector<PosePrediction> forward_batch(std::span<const Tensor> images, const Parameters& params,
                                          const ModelConfig& config) {
  std::vector<PosePrediction> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(forward(img, params, config));
  return out;
}

}  // namespace hpvit
