#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hpvit/flow.hpp"
#include "hpvit/model.hpp"

namespace hpvit {

// HPVT layout: "HPVT" | u32 version | u32 header length | JSON header | TNSR blocks.
// The header holds the model config, training metadata and a tensor directory
// (name, dims, offset relative to the first block, byte length, FNV-1a checksum).
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct EpochRecord {
  std::string phase;  // "init", "mpjpe" or "rle"
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_mpjpe = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainingMetadata {
  std::size_t epochs_completed = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
};

struct Checkpoint {
  ModelConfig config;
  Parameters params;
  std::optional<FlowModel> flow;
  TrainingMetadata meta;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError for framing problems and IntegrityError when the
/// directory, the blocks and the model config disagree.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace hpvit
