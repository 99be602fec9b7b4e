#include <doctest.h>

#include <cstdlib>
#include <set>

#include "pimc/errors.hpp"
#include "pimc/hilbert.hpp"

using namespace pimc;

namespace {

// Iterative index-to-coordinate conversion for a curve of side n.
PixelCoord d2xy(std::uint32_t n, std::uint32_t d) {
  std::uint32_t x = 0, y = 0, t = d;
  for (std::uint32_t s = 1; s < n; s *= 2) {
    const std::uint32_t rx = 1 & (t / 2);
    const std::uint32_t ry = 1 & (t ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
  return {x, y};
}

SitsCube blank(std::size_t h, std::size_t w) {
  SitsCube c;
  c.h = h;
  c.w = w;
  return c;
}

}  // namespace

TEST_CASE("hilbert order matches the iterative construction") {
  for (std::uint32_t ps : {2u, 4u, 8u, 16u, 32u, 64u}) {
    const auto curve = hilbert_order(ps);
    REQUIRE(curve.size() == ps * ps);
    for (std::uint32_t d = 0; d < ps * ps; ++d) REQUIRE(curve[d] == d2xy(ps, d));
  }
}

TEST_CASE("hilbert order is a bijection with unit steps") {
  for (std::size_t ps : {2, 4, 8, 16, 32}) {
    const auto curve = hilbert_order(ps);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& p : curve) {
      CHECK(p.x < ps);
      CHECK(p.y < ps);
      seen.insert({p.x, p.y});
    }
    CHECK(seen.size() == ps * ps);
    for (std::size_t i = 1; i < curve.size(); ++i) {
      const int dx = std::abs(int(curve[i].x) - int(curve[i - 1].x));
      const int dy = std::abs(int(curve[i].y) - int(curve[i - 1].y));
      REQUIRE(dx + dy == 1);
    }
    CHECK(curve[0] == PixelCoord{0, 0});
  }
}

TEST_CASE("non power of two sides cover every cell once") {
  for (std::size_t ps : {3, 5, 6, 12}) {
    const auto curve = hilbert_order(ps);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& p : curve) seen.insert({p.x, p.y});
    CHECK(seen.size() == ps * ps);
  }
  CHECK_THROWS_AS(hilbert_order(1), DomainError);
}

TEST_CASE("patch grid") {
  CHECK(slice_patches(blank(128, 128), 32).patches.size() == 16);
  CHECK(slice_patches(blank(32, 32), 32).patches.size() == 1);
  CHECK(slice_patches(blank(33, 33), 32).patches.size() == 1);
  CHECK(slice_patches(blank(40, 70), 16).patches.size() == 2 * 4);
  CHECK_THROWS_AS(slice_patches(blank(16, 16), 32), DomainError);
  CHECK_THROWS_AS(slice_patches(blank(16, 16), 1), DomainError);
  for (const auto& p : slice_patches(blank(100, 64), 16).patches) {
    CHECK(p.row % 16 == 0);
    CHECK(p.col % 16 == 0);
    CHECK(p.row + 16 <= 100);
  }
}

TEST_CASE("pixel sampling") {
  const auto h = sample_pixels(16, SamplingMode::Hilbert, 8, 0);
  const auto curve = hilbert_order(16);
  REQUIRE(h.size() == 8);
  for (std::size_t i = 0; i < 8; ++i) CHECK(h[i] == curve[i * 32]);

  const auto r1 = sample_pixels(16, SamplingMode::Random, 20, 5);
  const auto r2 = sample_pixels(16, SamplingMode::Random, 20, 5);
  CHECK(r1 == r2);
  std::set<std::pair<std::uint32_t, std::uint32_t>> distinct;
  for (const auto& p : r1) distinct.insert({p.x, p.y});
  CHECK(distinct.size() == 20);

  const auto ex = sample_pixels(8, SamplingMode::Random, 30, 9, 8);
  const auto hil = sample_pixels(8, SamplingMode::Hilbert, 8, 9);
  for (const auto& p : ex)
    for (const auto& q : hil) CHECK_FALSE(p == q);
  CHECK_THROWS_AS(sample_pixels(4, SamplingMode::Random, 17, 0), DomainError);
  CHECK(parse_mode("random") == SamplingMode::Random);
  CHECK_THROWS_AS(parse_mode("zigzag"), DomainError);
}
