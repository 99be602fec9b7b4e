#pragma once

#include <cstdint>
#include <vector>

#include "pimc/cube.hpp"

namespace pimc {

/// Parameters of the synthetic SITS generator. The cube is tiled into
/// square fields; each field draws a latent class plus two continuous
/// latents (u, v). u sets the share of a second harmonic in the seasonal
/// curve and the orientation of a stripe texture in the green band, v sets
/// the seasonal frequency and the stripe wavelength. Class sets the base
/// frequency and phase, reflectance levels and texture contrast. A third
/// latent w sets the length of a bare-soil spell in the series (none at 0)
/// and raises the stripe contrast; the spell onset also lifts the blue level.
/// Green is not used by NDVI/EVI/SAVI, so the texture never leaks into the
/// index series.
struct SynthOptions {
  std::uint64_t seed = 0;
  std::size_t classes = 4;
  std::size_t t = 32;
  std::size_t h = 64;
  std::size_t w = 64;
  float noise = 0.02f;         // std-dev of additive noise, truncated at 3 sigma
  std::size_t field = 32;      // field side in pixels
  float latent_jitter = 1.0f;  // scales the per-field latents; 0 = class-pure
  std::size_t cycle_steps = 32;  // timestamps per unit of seasonal frequency
  std::uint32_t start_day = 18262;  // 2020-01-01
  std::uint32_t day_step = 10;
};

struct FieldLatent {
  std::int32_t label = 0;
  float u = 0.0f;
  float v = 0.0f;
  float w = 0.0f;      // bare-soil spell length and stripe contrast
  float onset = 0.0f;  // spell start, fraction of the second quarter
};

struct SynthResult {
  SitsCube cube;
  LabelRaster labels;
  std::vector<FieldLatent> fields;  // row-major over the field grid
};

/// Deterministic under `seed`. Bands: blue, green, red, nir.
/// Requires classes >= 2 and t >= 8 (DomainError otherwise).
SynthResult synth_cube(const SynthOptions& opt);

}  // namespace pimc
