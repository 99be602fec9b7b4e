#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "pimc/hilbert.hpp"

namespace pimc {

/// RP[i][j] = |x_i - x_j|, row-major n x n. Requires n >= 2 and finite values.
std::vector<float> recurrence_plot(std::span<const float> series);

/// Three stacked, per-channel min-max normalized plots (NDVI, EVI, SAVI).
struct RpImage {
  std::size_t n = 0;
  std::vector<float> data;  // 3 x n x n
  PixelCoord pixel;
  std::array<float, 3> channel_min{};
  std::array<float, 3> channel_max{};
};

/// `series` holds 3 x n values. Constant channels map to all zeros.
RpImage stack_channels(std::span<const float> series, std::size_t n, PixelCoord pixel = {});

/// Bilinear resampling of every plane to s x s (half-pixel centres). s >= 8.
RpImage resize_rp(const RpImage& rp, std::size_t s);

/// Bilinear resize of `planes` stacked h x w planes into oh x ow.
std::vector<float> resize_planes(std::span<const float> src, std::size_t planes, std::size_t h, std::size_t w,
                                 std::size_t oh, std::size_t ow);

/// Batch of equally sized plots as a container (t = batch, c = 3, h = w = n).
void save_rp_batch(std::span<const RpImage> batch, const std::filesystem::path& path);
std::vector<RpImage> load_rp_batch(const std::filesystem::path& path);

}  // namespace pimc
