#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hpvit/tensor.hpp"

namespace hpvit {

// TNSR layout (all integers little-endian):
//   "TNSR" | u32 version = 1 | u32 ndim | ndim x u32 dims | f32 payload, row-major
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::vector<std::uint8_t> encode_tensor(const Tensor& t);

/// Decodes one TNSR block starting at `bytes[0]`. `base_offset` is added to
/// byte positions in error messages; `consumed` receives the block length.
Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t base_offset = 0,
                     std::size_t* consumed = nullptr);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// Rounds every value through f32, i.e. what a save/load round trip yields.
Tensor round_to_f32(const Tensor& t);

}  // namespace hpvit
