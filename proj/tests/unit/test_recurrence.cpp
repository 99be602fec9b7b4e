#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pimc/errors.hpp"
#include "pimc/recurrence.hpp"
#include "tempdir.hpp"

using namespace pimc;

namespace {

std::vector<float> brute_force(const std::vector<float>& x) {
  const std::size_t n = x.size();
  std::vector<float> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = std::fabs(x[i] - x[j]);
  return out;
}

// Multiples of 1/1024 so that shifting by an integer is exact in f32.
std::vector<float> dyadic_series(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> d(-1024, 1024);
  std::vector<float> x(n);
  for (auto& v : x) v = static_cast<float>(d(rng)) / 1024.0f;
  return x;
}

}  // namespace

TEST_CASE("recurrence plot equals the double loop") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> len(8, 64);
  std::normal_distribution<float> g(0.0f, 1.0f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<float> x(len(rng));
    for (auto& v : x) v = g(rng);
    REQUIRE(recurrence_plot(x) == brute_force(x));
  }
}

TEST_CASE("recurrence plot symmetry, diagonal and translation invariance") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = dyadic_series(rng, 8 + trial);
    const auto rp = recurrence_plot(x);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rp[i * n + i] == 0.0f);
      for (std::size_t j = 0; j < n; ++j) REQUIRE(rp[i * n + j] == rp[j * n + i]);
    }
    for (auto& v : x) v += 3.0f;
    CHECK(recurrence_plot(x) == rp);
  }
  CHECK_THROWS_AS(recurrence_plot(std::vector<float>{1.0f}), DomainError);
  CHECK_THROWS_AS(recurrence_plot(std::vector<float>{1.0f, NAN}), DomainError);
}

TEST_CASE("stacked channels are min-max normalized per channel") {
  const std::size_t n = 6;
  std::vector<float> s(3 * n);
  for (std::size_t t = 0; t < n; ++t) {
    s[t] = float(t);              // ramp
    s[n + t] = 0.25f;             // constant
    s[2 * n + t] = t % 2 ? 1 : 0;  // alternating
  }
  const auto rp = stack_channels(s, n, {3, 4});
  CHECK(rp.n == n);
  CHECK(rp.pixel == PixelCoord{3, 4});
  for (std::size_t c = 0; c < 3; ++c) {
    const auto plane = std::span<const float>(rp.data).subspan(c * n * n, n * n);
    const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
    CHECK(*lo == 0.0f);
    CHECK(*hi == (c == 1 ? 0.0f : 1.0f));
  }
  CHECK(rp.data[0 * n * n + 0 * n + 5] == 1.0f);
  CHECK(rp.data[0 * n * n + 1 * n + 3] == doctest::Approx(2.0f / 5.0f));
  CHECK_THROWS_AS(stack_channels(s, n + 1), DimensionError);
}

TEST_CASE("resizing keeps identity and constants") {
  std::mt19937_64 rng(3);
  std::vector<float> s(3 * 16);
  std::normal_distribution<float> g;
  for (auto& v : s) v = g(rng);
  const auto rp = stack_channels(s, 16);
  CHECK(resize_rp(rp, 16).data == rp.data);
  const auto up = resize_rp(rp, 32);
  CHECK(up.n == 32);
  CHECK(up.data.size() == 3 * 32 * 32);
  for (float v : up.data) CHECK((v >= 0.0f && v <= 1.0f));
  std::vector<float> flat(2 * 5 * 7, 0.75f);
  for (float v : resize_planes(flat, 2, 5, 7, 9, 3)) CHECK(v == doctest::Approx(0.75f));
  // half-pixel centres: downsampling 4 -> 2 averages neighbouring pairs
  const std::vector<float> ramp{0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3};
  const auto half = resize_planes(ramp, 1, 4, 4, 2, 2);
  CHECK(half[0] == doctest::Approx(0.5f));
  CHECK(half[1] == doctest::Approx(2.5f));
  CHECK_THROWS_AS(resize_rp(rp, 4), DomainError);
}

TEST_CASE("plot batches round trip") {
  testing::TempDir dir("rp_batch");
  std::vector<RpImage> batch;
  std::mt19937_64 rng(4);
  for (int i = 0; i < 3; ++i) {
    std::vector<float> s(3 * 10);
    for (auto& v : s) v = std::uniform_real_distribution<float>(-1, 1)(rng);
    batch.push_back(stack_channels(s, 10, {std::uint32_t(i), 2}));
  }
  save_rp_batch(batch, dir / "b.rp");
  const auto back = load_rp_batch(dir / "b.rp");
  REQUIRE(back.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(back[i].data == batch[i].data);
}
