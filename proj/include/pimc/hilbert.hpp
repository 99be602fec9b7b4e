#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pimc/cube.hpp"

namespace pimc {

/// x is the column, y the row.
struct PixelCoord {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct PatchRef {
  std::string region_id;
  std::size_t row = 0;  // origin, multiple of ps
  std::size_t col = 0;
};

/// Non-overlapping ps x ps tiles; remainder rows and columns are dropped.
struct PatchGrid {
  std::size_t ps = 0;
  std::vector<PatchRef> patches;  // row-major
};

PatchGrid slice_patches(const SitsCube& cube, std::size_t ps);

/// Every cell of a ps x ps patch in Hilbert-curve order, starting at (0,0).
/// Non-power-of-two sides use the curve of the next power of two with
/// out-of-range cells removed.
std::vector<PixelCoord> hilbert_order(std::size_t ps);

enum class SamplingMode { Hilbert, Random };

std::string mode_name(SamplingMode m);
SamplingMode parse_mode(const std::string& s);

/// Patch-relative pixel selection.
///  Hilbert: m cells taken along the curve with stride floor(ps^2 / m).
///  Random:  m distinct cells drawn under `seed`; when `exclude_hilbert` > 0
///           the cells of a Hilbert sample of that size are never drawn.
std::vector<PixelCoord> sample_pixels(std::size_t ps, SamplingMode mode, std::size_t m, std::uint64_t seed,
                                      std::size_t exclude_hilbert = 0);

}  // namespace pimc
