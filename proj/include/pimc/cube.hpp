#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pimc/container.hpp"

namespace pimc {

/// One region's multiband time series, t x c x h x w, reflectance in [0, 1].
struct SitsCube {
  std::string region_id;
  std::vector<std::uint32_t> timestamps;  // days since 1970-01-01, strictly increasing
  std::vector<std::string> bands;
  std::size_t t = 0, c = 0, h = 0, w = 0;
  std::vector<float> data;

  float at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) const {
    return data[((ti * c + ci) * h + y) * w + x];
  }
  float& at(std::size_t ti, std::size_t ci, std::size_t y, std::size_t x) {
    return data[((ti * c + ci) * h + y) * w + x];
  }

  /// Index of a band by name; throws ConfigError when absent.
  std::size_t band_index(const std::string& name) const;
  bool has_band(const std::string& name) const;

  /// Throws ValidationError on any broken invariant.
  void validate() const;
};

/// Per-pixel integer labels, h x w.
struct LabelRaster {
  std::size_t h = 0, w = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(std::size_t y, std::size_t x) const { return labels[y * w + x]; }
};

std::string iso_date(std::uint32_t days_since_epoch);
std::uint32_t days_from_iso(const std::string& iso);

struct CubeWriteOptions {
  DType dtype = DType::F32;
  float scale = 1.0f;  // used for U16: stored = round(value * scale)
};

/// Reads a cube: scales by the header scale, clamps to [0, 1] and fills
/// nodata sentinels by linear interpolation along time (nearest valid value
/// at the ends). The region id is the file stem.
SitsCube read_cube(const std::filesystem::path& path);
SitsCube cube_from_container(Container ct, std::string region_id);
void write_cube(const SitsCube& cube, const std::filesystem::path& path, CubeWriteOptions opt = {});

void write_labels(const LabelRaster& labels, const std::filesystem::path& path);
LabelRaster read_labels(const std::filesystem::path& path);

}  // namespace pimc
