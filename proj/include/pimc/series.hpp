#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pimc/cube.hpp"
#include "pimc/hilbert.hpp"

namespace pimc {

inline constexpr std::size_t kIndexChannels = 3;  // NDVI, EVI, SAVI

/// Per-pixel vegetation-index series for one patch: m x 3 x n.
struct IndexSeriesSet {
  PatchRef patch;
  std::size_t ps = 0;
  std::vector<PixelCoord> pixels;  // absolute cube coordinates
  SamplingMode mode = SamplingMode::Hilbert;
  std::uint64_t seed = 0;
  std::size_t n = 0;  // series length == cube t
  std::vector<std::uint32_t> timestamps;
  std::vector<float> series;

  std::size_t size() const { return pixels.size(); }
  /// 3 x n block of pixel i.
  std::span<const float> pixel_series(std::size_t i) const {
    return std::span<const float>(series).subspan(i * kIndexChannels * n, kIndexChannels * n);
  }
};

/// Computes NDVI/EVI/SAVI per timestamp for each pixel. Coordinates are
/// absolute and must fall inside both the cube and the patch.
IndexSeriesSet build_series(const SitsCube& cube, const PatchRef& patch, std::size_t ps,
                            std::span<const PixelCoord> pixels, SamplingMode mode = SamplingMode::Hilbert,
                            std::uint64_t seed = 0);

/// Convenience: sample pixels inside `patch` and build their series.
IndexSeriesSet extract_patch_series(const SitsCube& cube, const PatchRef& patch, std::size_t ps, SamplingMode mode,
                                    std::size_t m, std::uint64_t seed, std::size_t exclude_hilbert = 0);

/// Stores the sets of one region as a single container (t = n, c = 3,
/// h = 1, w = total pixels) plus a JSON sidecar at `path` + ".json".
void save_series_sets(const std::vector<IndexSeriesSet>& sets, const std::filesystem::path& path);
std::vector<IndexSeriesSet> load_series_sets(const std::filesystem::path& path);

}  // namespace pimc
