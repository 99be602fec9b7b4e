#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

// PIMC binary container, little-endian:
//
//   off  size  field
//     0     4  magic "PIMC"
//     4     2  version (u16, currently 1)
//     6     1  dtype (0 = f32, 1 = u16 scaled)
//     7     1  reserved, zero
//     8     4  scale (f32); stored value / scale = physical value
//    12    16  t, c, h, w (u32 each)
//    28     4  nodata sentinel (f32, in stored units)
//    32     4  flags (u32); bit 0 = nodata sentinel present
//    36    28  reserved, zero
//    64     .  band names: c entries of (u16 byte length, UTF-8 bytes)
//     .     .  timestamps: t entries of u32 days since 1970-01-01
//     .     .  payload: t*c*h*w values, row-major, f32 or u16
//
// The same layout stores generic tensors (series sets, plot batches,
// checkpoint weights) with timestamps 0..t-1.

namespace pimc {

enum class DType : std::uint8_t { F32 = 0, U16 = 1 };

inline constexpr std::size_t kHeaderBytes = 64;
inline constexpr std::uint16_t kContainerVersion = 1;

struct Container {
  DType dtype = DType::F32;
  float scale = 1.0f;
  std::uint32_t t = 0, c = 0, h = 0, w = 0;
  bool has_nodata = false;
  float nodata = 0.0f;
  std::vector<std::string> bands;
  std::vector<std::uint32_t> timestamps;
  /// Stored values (u16 payloads widened to float, not divided by scale).
  std::vector<float> values;

  std::size_t numel() const { return static_cast<std::size_t>(t) * c * h * w; }
};

std::vector<char> encode_container(const Container& ct);

/// Decodes one container starting at bytes[0]. When `consumed` is null the
/// container must span `bytes` exactly; otherwise trailing bytes are allowed
/// and the container length is written to *consumed.
Container decode_container(std::span<const char> bytes, std::size_t* consumed = nullptr);

void write_container(const Container& ct, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

std::vector<char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const char> bytes);

/// Wraps a tensor of rank <= 4 (leading dims padded with 1) as an f32 container.
Container tensor_container(std::span<const std::size_t> shape, std::span<const float> values,
                           std::vector<std::string> channel_names = {});

}  // namespace pimc
