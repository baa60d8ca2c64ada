#include "hpvit/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <map>
#include <set>

#include <json.hpp>

#include "hpvit/errors.hpp"
#include "hpvit/tensor_io.hpp"

namespace hpvit {

using json = nlohmann::json;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace {

constexpr std::uint8_t kMagic[4] = {'H', 'P', 'V', 'T'};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json config_to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"image_size", c.image_size},
          {"patch_size", c.patch_size},
          {"embed_dim", c.embed_dim},
          {"depth", c.depth},
          {"heads", c.heads},
          {"decoder_depth", c.decoder_depth},
          {"mlp_ratio", c.mlp_ratio},
          {"head_mode", to_string(c.head_mode)},
          {"output_offset", c.output_offset},
          {"output_scale", c.output_scale}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.image_size = j.at("image_size").get<std::size_t>();
  c.patch_size = j.at("patch_size").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.depth = j.at("depth").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.decoder_depth = j.at("decoder_depth").get<std::size_t>();
  c.mlp_ratio = j.at("mlp_ratio").get<double>();
  c.head_mode = parse_head_mode(j.at("head_mode").get<std::string>());
  c.output_offset = j.at("output_offset").get<Vec3>();
  c.output_scale = j.at("output_scale").get<double>();
  return c;
}

json rle_to_json(const RleConfig& r) {
  return {{"mode", to_string(r.mode)}, {"s", r.s}, {"flow_layers", r.flow_layers}, {"flow_hidden", r.flow_hidden}};
}

RleConfig rle_from_json(const json& j) {
  RleConfig r;
  r.mode = parse_rle_mode(j.at("mode").get<std::string>());
  r.s = j.at("s").get<double>();
  r.flow_layers = j.at("flow_layers").get<std::size_t>();
  r.flow_hidden = j.at("flow_hidden").get<std::size_t>();
  return r;
}

json meta_to_json(const TrainingMetadata& m) {
  json hist = json::array();
  for (const auto& e : m.history) {
    hist.push_back({{"phase", e.phase}, {"epoch", e.epoch}, {"loss", e.loss}, {"train_mpjpe", e.train_mpjpe}});
  }
  return {{"epochs_completed", m.epochs_completed}, {"seed", m.seed}, {"history", hist}};
}

TrainingMetadata meta_from_json(const json& j) {
  TrainingMetadata m;
  m.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& e : j.at("history")) {
    m.history.push_back({e.at("phase").get<std::string>(), e.at("epoch").get<std::size_t>(), e.at("loss").get<double>(),
                         e.at("train_mpjpe").get<double>()});
  }
  return m;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ckpt.config.validate();
  std::vector<std::uint8_t> blocks;
  json directory = json::array();
  auto add_block = [&](const std::string& name, const Tensor& t) {
    const auto enc = encode_tensor(t);
    directory.push_back({{"name", name},
                         {"dims", t.dims()},
                         {"offset", blocks.size()},
                         {"bytes", enc.size()},
                         {"fnv1a64", hex64(fnv1a64(enc))}});
    blocks.insert(blocks.end(), enc.begin(), enc.end());
  };
  for (const auto& [name, t] : ckpt.params) add_block(name, t);
  if (ckpt.flow) {
    for (const auto& [name, t] : ckpt.flow->params) add_block(name, t);
  }

  json header = {{"model", config_to_json(ckpt.config)},
                 {"metadata", meta_to_json(ckpt.meta)},
                 {"rle", ckpt.flow ? rle_to_json(ckpt.flow->config) : json(nullptr)},
                 {"tensors", directory}};
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.resize(12 + text.size() + blocks.size());
  std::copy(text.begin(), text.end(), out.begin() + 12);
  std::copy(blocks.begin(), blocks.end(), out.begin() + 12 + static_cast<std::ptrdiff_t>(text.size()));
  return out;
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) throw FormatError("checkpoint: truncated preamble", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("checkpoint: bad magic (expected HPVT)", 0);
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version) + " (this build reads version " +
                          std::to_string(kCheckpointVersion) + ")",
                      4);
  }
  const std::size_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + header_len) throw FormatError("checkpoint: truncated header", bytes.size());

  json header;
  try {
    header = json::parse(bytes.begin() + 12, bytes.begin() + 12 + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint: malformed JSON header: ") + e.what(), 12 + e.byte);
  }

  Checkpoint ckpt;
  std::map<std::string, Shape> expected;
  std::set<std::string> flow_names;
  try {
    ckpt.config = config_from_json(header.at("model"));
    ckpt.meta = meta_from_json(header.at("metadata"));
    if (!header.at("rle").is_null()) {
      const RleConfig rle = rle_from_json(header.at("rle"));
      rle.validate();
      FlowModel skeleton = FlowModel::init(rle, 0);
      for (const auto& [name, t] : skeleton.params) {
        expected[name] = t.dims();
        flow_names.insert(name);
      }
      ckpt.flow = FlowModel{rle, {}};
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: header field error: ") + e.what(), 12);
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: invalid config in header: ") + e.what());
  }
  try {
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: ") + e.what());
  }
  for (auto& [name, dims] : parameter_shapes(ckpt.config)) expected[name] = dims;

  const std::size_t base = 12 + header_len;
  const auto blocks = bytes.subspan(base);
  std::size_t covered = 0;
  std::set<std::string> seen;
  for (const auto& entry : header.at("tensors")) {
    std::string name;
    Shape dims;
    std::size_t offset = 0, length = 0;
    std::string checksum;
    try {
      name = entry.at("name").get<std::string>();
      dims = entry.at("dims").get<Shape>();
      offset = entry.at("offset").get<std::size_t>();
      length = entry.at("bytes").get<std::size_t>();
      checksum = entry.at("fnv1a64").get<std::string>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("checkpoint: bad tensor directory entry: ") + e.what(), 12);
    }
    auto exp = expected.find(name);
    if (exp == expected.end()) throw IntegrityError("checkpoint: unexpected tensor '" + name + "'");
    if (!seen.insert(name).second) throw IntegrityError("checkpoint: duplicate tensor '" + name + "'");
    if (dims != exp->second) {
      throw IntegrityError("checkpoint: tensor '" + name + "' has shape " + shape_str(dims) + ", config requires " +
                           shape_str(exp->second));
    }
    if (offset != covered || offset + length > blocks.size()) {
      throw IntegrityError("checkpoint: tensor '" + name + "' block lies outside the file or out of order");
    }
    const auto block = blocks.subspan(offset, length);
    if (hex64(fnv1a64(block)) != checksum) throw IntegrityError("checkpoint: checksum mismatch in tensor '" + name + "'");
    Tensor t;
    std::size_t used = 0;
    try {
      t = decode_tensor(block, base + offset, &used);
    } catch (const FormatError& e) {
      throw IntegrityError("checkpoint: tensor '" + name + "' is corrupt: " + e.what());
    }
    if (used != length || t.dims() != dims) {
      throw IntegrityError("checkpoint: tensor '" + name + "' block disagrees with the directory");
    }
    covered += length;
    if (flow_names.count(name)) {
      ckpt.flow->params.insert(name, std::move(t));
    } else {
      ckpt.params.insert(name, std::move(t));
    }
  }
  for (const auto& [name, _] : expected) {
    if (!seen.count(name)) throw IntegrityError("checkpoint: missing tensor '" + name + "'");
  }
  if (covered != blocks.size()) throw IntegrityError("checkpoint: trailing bytes after the last tensor block");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace hpvit
