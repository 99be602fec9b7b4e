#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace pimc {

inline constexpr float kIndexEps = 1e-8f;

/// (NIR - R) / (NIR + R)
float ndvi(float nir, float red);
/// 2.5 (NIR - R) / (NIR + 6R - 7.5B + 1), clamped to [-2, 2]
float evi(float nir, float red, float blue);
/// 1.5 (NIR - R) / (NIR + R + 0.5)
float savi(float nir, float red);

/// A per-pixel spectral index over named bands.
struct VegetationIndex {
  std::string name;
  std::vector<std::string> bands;  // argument order for `fn`
  std::function<float(const float*)> fn;
};

/// NDVI, EVI, SAVI in channel order. Other indices can be built the same
/// way and passed to build_series.
const std::array<VegetationIndex, 3>& default_indices();

}  // namespace pimc
