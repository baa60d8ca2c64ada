#include "hpvit/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hpvit/errors.hpp"

namespace hpvit {

namespace {

constexpr std::uint8_t kMagic[4] = {'T', 'N', 'S', 'R'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(12 + 4 * t.ndim() + 4 * t.numel());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(t.ndim()));
  for (auto d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes, std::size_t base_offset, std::size_t* consumed) {
  auto need = [&](std::size_t pos, std::size_t n, const char* what) {
    if (bytes.size() < pos + n) throw FormatError(std::string("tensor: truncated ") + what, base_offset + bytes.size());
  };
  need(0, 4, "magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("tensor: bad magic (expected TNSR)", base_offset);
  need(4, 4, "version");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kTensorFormatVersion) {
    throw FormatError("tensor: unsupported version " + std::to_string(version), base_offset + 4);
  }
  need(8, 4, "ndim");
  const std::uint32_t ndim = get_u32(bytes, 8);
  if (ndim == 0) throw FormatError("tensor: empty dims", base_offset + 8);
  if (ndim > 16) throw FormatError("tensor: implausible ndim " + std::to_string(ndim), base_offset + 8);
  need(12, 4 * static_cast<std::size_t>(ndim), "dims");
  Shape dims(ndim);
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < ndim; ++i) {
    dims[i] = get_u32(bytes, 12 + 4 * i);
    if (dims[i] == 0) throw FormatError("tensor: zero-length dimension", base_offset + 12 + 4 * i);
    numel *= dims[i];
    if (numel > (std::size_t{1} << 34)) throw FormatError("tensor: implausible size", base_offset + 12 + 4 * i);
  }
  const std::size_t payload = 12 + 4 * static_cast<std::size_t>(ndim);
  need(payload, 4 * numel, "payload");
  std::vector<double> data(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, payload + 4 * i)));
  }
  if (consumed) *consumed = payload + 4 * numel;
  return Tensor::from(std::move(dims), std::move(data));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::size_t used = 0;
  Tensor t = decode_tensor(bytes, 0, &used);
  if (used != bytes.size()) throw FormatError("tensor: trailing bytes after payload", used);
  return t;
}

Tensor round_to_f32(const Tensor& t) {
  std::vector<double> data(t.data().begin(), t.data().end());
  for (double& v : data) v = static_cast<double>(static_cast<float>(v));
  return Tensor::from(t.dims(), std::move(data), t.requires_grad());
}

}  // namespace hpvit
