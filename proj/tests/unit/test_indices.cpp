#include <doctest.h>

#include <cmath>
#include <random>

#include "pimc/indices.hpp"
#include "pimc/series.hpp"
#include "pimc/synth.hpp"

using namespace pimc;

TEST_CASE("index hand values") {
  CHECK(ndvi(0.5f, 0.1f) == doctest::Approx(0.4 / 0.6));
  CHECK(evi(0.5f, 0.1f, 0.05f) == doctest::Approx(1.0 / 1.725).epsilon(1e-5));
  CHECK(evi(0.5f, 0.1f, 0.05f) == doctest::Approx(0.5797).epsilon(1e-3));
  CHECK(savi(0.5f, 0.1f) == doctest::Approx(1.5 * 0.4 / 1.1));
  CHECK(ndvi(0.0f, 0.0f) == 0.0f);
}

TEST_CASE("index bounds over random reflectance") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  for (int i = 0; i < 100000; ++i) {
    const float b = d(rng), r = d(rng), n = d(rng);
    const float a = ndvi(n, r), s = savi(n, r), e = evi(n, r, b);
    REQUIRE(a >= -1.0f - 1e-6f);
    REQUIRE(a <= 1.0f + 1e-6f);
    REQUIRE(s >= -1.0f - 1e-6f);
    REQUIRE(s <= 1.0f + 1e-6f);
    REQUIRE(std::isfinite(e));
    REQUIRE(std::abs(e) <= 2.0f);
  }
  // corners
  for (float b : {0.0f, 1.0f})
    for (float r : {0.0f, 1.0f})
      for (float n : {0.0f, 1.0f}) CHECK(std::isfinite(evi(n, r, b)));
}

TEST_CASE("default index table") {
  const auto& t = default_indices();
  CHECK(t[0].name == "NDVI");
  CHECK(t[1].name == "EVI");
  CHECK(t[2].name == "SAVI");
  auto value = [](const std::string& band) { return band == "blue" ? 0.05f : band == "red" ? 0.1f : 0.5f; };
  const float expect[3] = {ndvi(0.5f, 0.1f), evi(0.5f, 0.1f, 0.05f), savi(0.5f, 0.1f)};
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<float> args;
    for (const auto& b : t[k].bands) args.push_back(value(b));
    CHECK(t[k].fn(args.data()) == expect[k]);
  }
}

TEST_CASE("patch series follow the cube bands") {
  SynthOptions o;
  o.h = o.w = 16;
  o.field = 8;
  o.t = 12;
  const auto cube = synth_cube(o).cube;
  const PatchRef patch{"x", 8, 0};
  const auto set = extract_patch_series(cube, patch, 8, SamplingMode::Hilbert, 4, 0);
  REQUIRE(set.size() == 4);
  CHECK(set.n == 12);
  const auto blue = cube.band_index("blue"), red = cube.band_index("red"), nir = cube.band_index("nir");
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto p = set.pixels[i];
    CHECK(p.y >= 8);
    CHECK(p.y < 16);
    CHECK(p.x < 8);
    const auto s = set.pixel_series(i);
    for (std::size_t t = 0; t < set.n; ++t) {
      const float r = cube.at(t, red, p.y, p.x), n = cube.at(t, nir, p.y, p.x), b = cube.at(t, blue, p.y, p.x);
      CHECK(s[t] == ndvi(n, r));
      CHECK(s[set.n + t] == evi(n, r, b));
      CHECK(s[2 * set.n + t] == savi(n, r));
    }
  }
  CHECK_THROWS(build_series(cube, patch, 8, std::vector<PixelCoord>{{9, 9}}));
}
