#include "pimc/indices.hpp"

#include <algorithm>
#include <cmath>

namespace pimc {
namespace {

float guarded(float den) {
  if (std::fabs(den) >= kIndexEps) return den;
  return den < 0.0f ? -kIndexEps : kIndexEps;
}

}  // namespace

float ndvi(float nir, float red) { return (nir - red) / guarded(nir + red); }

float evi(float nir, float red, float blue) {
  const float v = 2.5f * (nir - red) / guarded(nir + 6.0f * red - 7.5f * blue + 1.0f);
  return std::clamp(v, -2.0f, 2.0f);
}

float savi(float nir, float red) { return 1.5f * (nir - red) / guarded(nir + red + 0.5f); }

const std::array<VegetationIndex, 3>& default_indices() {
  static const std::array<VegetationIndex, 3> registry = {
      VegetationIndex{"NDVI", {"nir", "red"}, [](const float* b) { return ndvi(b[0], b[1]); }},
      VegetationIndex{"EVI", {"nir", "red", "blue"}, [](const float* b) { return evi(b[0], b[1], b[2]); }},
      VegetationIndex{"SAVI", {"nir", "red"}, [](const float* b) { return savi(b[0], b[1]); }},
  };
  return registry;
}

}  // namespace pimc
