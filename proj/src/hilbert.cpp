#include "pimc/hilbert.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "pimc/errors.hpp"

namespace pimc {

PatchGrid slice_patches(const SitsCube& cube, std::size_t ps) {
  if (ps < 2) throw DomainError("slice_patches: ps must be >= 2");
  if (ps > std::min(cube.h, cube.w)) {
    throw DomainError("slice_patches: empty grid, ps=" + std::to_string(ps) + " exceeds " + std::to_string(cube.h) +
                      "x" + std::to_string(cube.w));
  }
  PatchGrid grid;
  grid.ps = ps;
  for (std::size_t r = 0; r + ps <= cube.h; r += ps) {
    for (std::size_t c = 0; c + ps <= cube.w; c += ps) grid.patches.push_back({cube.region_id, r, c});
  }
  return grid;
}

namespace {

// Curve of side n (power of two) from four transformed copies of the curve
// of side n/2: transpose, shift up, shift diagonally, anti-transpose.
std::vector<PixelCoord> hilbert_pow2(std::uint32_t n) {
  if (n == 1) return {PixelCoord{0, 0}};
  const auto sub = hilbert_pow2(n / 2);
  const std::uint32_t s = n / 2;
  std::vector<PixelCoord> out;
  out.reserve(static_cast<std::size_t>(n) * n);
  for (const auto& p : sub) out.push_back({p.y, p.x});
  for (const auto& p : sub) out.push_back({p.x, p.y + s});
  for (const auto& p : sub) out.push_back({p.x + s, p.y + s});
  for (const auto& p : sub) out.push_back({2 * s - 1 - p.y, s - 1 - p.x});
  return out;
}

}  // namespace

std::vector<PixelCoord> hilbert_order(std::size_t ps) {
  if (ps < 2) throw DomainError("hilbert_order: ps must be >= 2");
  std::uint32_t side = 1;
  while (side < ps) side *= 2;
  auto curve = hilbert_pow2(side);
  if (side != ps) {
    std::erase_if(curve, [ps](const PixelCoord& p) { return p.x >= ps || p.y >= ps; });
  }
  return curve;
}

std::string mode_name(SamplingMode m) { return m == SamplingMode::Hilbert ? "hilbert" : "random"; }

SamplingMode parse_mode(const std::string& s) {
  if (s == "hilbert") return SamplingMode::Hilbert;
  if (s == "random") return SamplingMode::Random;
  throw DomainError("unknown sampling mode \"" + s + "\" (expected hilbert|random)");
}

std::vector<PixelCoord> sample_pixels(std::size_t ps, SamplingMode mode, std::size_t m, std::uint64_t seed,
                                      std::size_t exclude_hilbert) {
  const std::size_t cells = ps * ps;
  if (m > cells) {
    throw DomainError("sample_pixels: m=" + std::to_string(m) + " exceeds " + std::to_string(cells) + " cells");
  }
  if (mode == SamplingMode::Hilbert) {
    if (m == 0) return {};
    const auto curve = hilbert_order(ps);
    const std::size_t stride = cells / m;
    std::vector<PixelCoord> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(curve[i * stride]);
    return out;
  }

  std::vector<PixelCoord> pool;
  pool.reserve(cells);
  std::unordered_set<std::size_t> excluded;
  if (exclude_hilbert > 0) {
    for (const auto& p : sample_pixels(ps, SamplingMode::Hilbert, exclude_hilbert, seed)) excluded.insert(p.y * ps + p.x);
  }
  for (std::uint32_t y = 0; y < ps; ++y) {
    for (std::uint32_t x = 0; x < ps; ++x) {
      if (!excluded.contains(y * ps + x)) pool.push_back({x, y});
    }
  }
  if (m > pool.size()) {
    throw DomainError("sample_pixels: m=" + std::to_string(m) + " exceeds " + std::to_string(pool.size()) +
                      " cells left after excluding the Hilbert sample");
  }
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(m);
  return pool;
}

}  // namespace pimc
