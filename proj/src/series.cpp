#include "pimc/series.hpp"

#include <fstream>
#include <json.hpp>

#include "pimc/container.hpp"
#include "pimc/errors.hpp"
#include "pimc/indices.hpp"

namespace pimc {

IndexSeriesSet build_series(const SitsCube& cube, const PatchRef& patch, std::size_t ps,
                            std::span<const PixelCoord> pixels, SamplingMode mode, std::uint64_t seed) {
  const auto& registry = default_indices();
  std::vector<std::vector<std::size_t>> band_idx;
  for (const auto& index : registry) {
    std::vector<std::size_t> idx;
    for (const auto& b : index.bands) idx.push_back(cube.band_index(b));
    band_idx.push_back(std::move(idx));
  }
  IndexSeriesSet set;
  set.patch = patch;
  set.ps = ps;
  set.mode = mode;
  set.seed = seed;
  set.n = cube.t;
  set.timestamps = cube.timestamps;
  set.pixels.assign(pixels.begin(), pixels.end());
  set.series.resize(pixels.size() * kIndexChannels * cube.t);
  float args[8];
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const auto& p = pixels[i];
    if (p.x >= cube.w || p.y >= cube.h) throw DomainError("build_series: pixel outside cube extent");
    if (p.y < patch.row || p.y >= patch.row + ps || p.x < patch.col || p.x >= patch.col + ps) {
      throw DomainError("build_series: pixel outside patch");
    }
    for (std::size_t k = 0; k < kIndexChannels; ++k) {
      float* out = set.series.data() + (i * kIndexChannels + k) * cube.t;
      for (std::size_t ti = 0; ti < cube.t; ++ti) {
        for (std::size_t a = 0; a < band_idx[k].size(); ++a) args[a] = cube.at(ti, band_idx[k][a], p.y, p.x);
        out[ti] = registry[k].fn(args);
      }
    }
  }
  return set;
}

IndexSeriesSet extract_patch_series(const SitsCube& cube, const PatchRef& patch, std::size_t ps, SamplingMode mode,
                                    std::size_t m, std::uint64_t seed, std::size_t exclude_hilbert) {
  auto rel = sample_pixels(ps, mode, m, seed, exclude_hilbert);
  for (auto& p : rel) {
    p.x += static_cast<std::uint32_t>(patch.col);
    p.y += static_cast<std::uint32_t>(patch.row);
  }
  return build_series(cube, patch, ps, rel, mode, seed);
}

void save_series_sets(const std::vector<IndexSeriesSet>& sets, const std::filesystem::path& path) {
  if (sets.empty()) throw DomainError("save_series_sets: nothing to save");
  const std::size_t n = sets.front().n;
  std::size_t total = 0;
  for (const auto& s : sets) {
    if (s.n != n) throw DimensionError("save_series_sets: mixed series lengths");
    total += s.size();
  }
  if (total == 0) throw DomainError("save_series_sets: sets hold no pixels");
  Container ct;
  ct.t = static_cast<std::uint32_t>(n);
  ct.c = kIndexChannels;
  ct.h = 1;
  ct.w = static_cast<std::uint32_t>(total);
  ct.bands = {"NDVI", "EVI", "SAVI"};
  ct.timestamps = sets.front().timestamps;
  ct.values.resize(ct.numel());
  nlohmann::json side;
  side["sets"] = nlohmann::json::array();
  std::size_t col = 0;
  for (const auto& s : sets) {
    nlohmann::json js;
    js["region_id"] = s.patch.region_id;
    js["patch_row"] = s.patch.row;
    js["patch_col"] = s.patch.col;
    js["ps"] = s.ps;
    js["mode"] = mode_name(s.mode);
    js["seed"] = s.seed;
    js["offset"] = col;
    nlohmann::json px = nlohmann::json::array();
    for (const auto& p : s.pixels) px.push_back({p.x, p.y});
    js["pixels"] = std::move(px);
    side["sets"].push_back(std::move(js));
    for (std::size_t i = 0; i < s.size(); ++i, ++col) {
      for (std::size_t k = 0; k < kIndexChannels; ++k) {
        for (std::size_t ti = 0; ti < n; ++ti) ct.values[(ti * kIndexChannels + k) * total + col] = s.series[(i * kIndexChannels + k) * n + ti];
      }
    }
  }
  write_container(ct, path);
  std::ofstream out(path.string() + ".json", std::ios::trunc);
  out << side.dump(1) << '\n';
}

std::vector<IndexSeriesSet> load_series_sets(const std::filesystem::path& path) {
  const auto ct = read_container(path);
  if (ct.c != kIndexChannels || ct.h != 1) throw ValidationError(path.string() + ": not an index series container");
  std::ifstream in(path.string() + ".json");
  if (!in) throw ConfigError("missing sidecar " + path.string() + ".json");
  nlohmann::json side;
  in >> side;
  const std::size_t n = ct.t, total = ct.w;
  std::vector<IndexSeriesSet> sets;
  for (const auto& js : side.at("sets")) {
    IndexSeriesSet s;
    s.patch.region_id = js.at("region_id").get<std::string>();
    s.patch.row = js.at("patch_row").get<std::size_t>();
    s.patch.col = js.at("patch_col").get<std::size_t>();
    s.ps = js.at("ps").get<std::size_t>();
    s.mode = parse_mode(js.at("mode").get<std::string>());
    s.seed = js.at("seed").get<std::uint64_t>();
    s.n = n;
    s.timestamps = ct.timestamps;
    const std::size_t offset = js.at("offset").get<std::size_t>();
    for (const auto& p : js.at("pixels")) s.pixels.push_back({p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()});
    if (offset + s.pixels.size() > total) throw CorruptionError(path.string() + ": sidecar offsets exceed payload");
    s.series.resize(s.pixels.size() * kIndexChannels * n);
    for (std::size_t i = 0; i < s.pixels.size(); ++i) {
      for (std::size_t k = 0; k < kIndexChannels; ++k) {
        for (std::size_t ti = 0; ti < n; ++ti) s.series[(i * kIndexChannels + k) * n + ti] = ct.values[(ti * kIndexChannels + k) * total + offset + i];
      }
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace pimc
