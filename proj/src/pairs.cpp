#include "pimc/pairs.hpp"

#include <algorithm>
#include <map>
#include <random>
#include <spdlog/spdlog.h>

#include "pimc/errors.hpp"

namespace pimc {

std::size_t PairDataset::pair_count() const {
  std::size_t n = 0;
  for (const auto& p : patches) n += p.plots.size();
  return n;
}

void append_patches(PairDataset& ds, const SitsCube& cube, const std::vector<IndexSeriesSet>& sets,
                    const LabelRaster* labels) {
  if (ds.image_size < 8 || ds.plot_size < 8) throw DomainError("pair dataset: encoder sizes must be >= 8");
  const std::size_t s = ds.image_size;
  const std::size_t bands[3] = {cube.band_index("red"), cube.band_index("green"), cube.band_index("blue")};
  for (const auto& set : sets) {
    if (set.size() == 0) continue;
    const std::size_t ps = set.ps;
    PatchSample sample;
    sample.patch = set.patch;
    sample.timestamps = cube.t;
    std::vector<float> raw(3 * ps * ps);
    sample.rgb.reserve(cube.t * 3 * s * s);
    for (std::size_t ti = 0; ti < cube.t; ++ti) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t y = 0; y < ps; ++y) {
          for (std::size_t x = 0; x < ps; ++x) {
            raw[(ch * ps + y) * ps + x] = cube.at(ti, bands[ch], set.patch.row + y, set.patch.col + x);
          }
        }
      }
      if (ps == s) {
        sample.rgb.insert(sample.rgb.end(), raw.begin(), raw.end());
      } else {
        const auto resized = resize_planes(raw, 3, ps, ps, s, s);
        sample.rgb.insert(sample.rgb.end(), resized.begin(), resized.end());
      }
    }
    for (std::size_t i = 0; i < set.size(); ++i) {
      auto rp = stack_channels(set.pixel_series(i), set.n, set.pixels[i]);
      sample.plots.push_back(rp.n == ds.plot_size ? std::move(rp) : resize_rp(rp, ds.plot_size));
    }
    if (labels != nullptr) {
      std::map<std::int32_t, std::size_t> votes;
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x) ++votes[labels->at(set.patch.row + y, set.patch.col + x)];
      sample.label = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
                       return a.second < b.second;
                     })->first;
    }
    ds.patches.push_back(std::move(sample));
  }
}

PairDataset build_pair_dataset(const SitsCube& cube, std::size_t ps, std::size_t m, std::size_t image_size,
                               std::size_t plot_size, SamplingMode mode, std::uint64_t seed,
                               const LabelRaster* labels) {
  PairDataset ds;
  ds.image_size = image_size;
  ds.plot_size = plot_size;
  const auto grid = slice_patches(cube, ps);
  std::vector<IndexSeriesSet> sets;
  for (std::size_t i = 0; i < grid.patches.size(); ++i) {
    sets.push_back(extract_patch_series(cube, grid.patches[i], ps, mode, m, seed + i));
  }
  append_patches(ds, cube, sets, labels);
  return ds;
}

std::vector<std::vector<PairPick>> plan_pair_batches(const PairDataset& ds, std::size_t batch_size,
                                                     std::uint64_t seed, std::size_t epoch) {
  if (batch_size == 0) throw DomainError("plan_pair_batches: batch size must be positive");
  if (ds.patches.empty()) throw DomainError("plan_pair_batches: dataset is empty");
  if (ds.patches.size() < batch_size) {
    spdlog::warn("only {} distinct patches for batch size {}; batches will be smaller", ds.patches.size(), batch_size);
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(ds.patches.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<PairPick>> plan;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<PairPick> batch;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      const auto& p = ds.patches[order[i]];
      if (p.plots.empty()) continue;
      PairPick pick;
      pick.patch = order[i];
      pick.timestamp = std::uniform_int_distribution<std::size_t>(0, p.timestamps - 1)(rng);
      pick.plot = std::uniform_int_distribution<std::size_t>(0, p.plots.size() - 1)(rng);
      batch.push_back(pick);
    }
    if (!batch.empty()) plan.push_back(std::move(batch));
  }
  return plan;
}

PairBatch materialize(const PairDataset& ds, const std::vector<PairPick>& picks) {
  const std::size_t s = ds.image_size, q = ds.plot_size, plane = 3 * s * s, rp_plane = 3 * q * q;
  const std::size_t b = picks.size();
  std::vector<float> images(b * plane), plots(b * rp_plane);
  PairBatch out;
  for (std::size_t i = 0; i < b; ++i) {
    const auto& p = ds.patches.at(picks[i].patch);
    std::copy_n(p.rgb.begin() + static_cast<std::ptrdiff_t>(picks[i].timestamp * plane), plane,
                images.begin() + static_cast<std::ptrdiff_t>(i * plane));
    const auto& rp = p.plots.at(picks[i].plot);
    std::copy_n(rp.data.begin(), rp_plane, plots.begin() + static_cast<std::ptrdiff_t>(i * rp_plane));
    out.patch_ids.push_back(picks[i].patch);
    out.timestamps.push_back(picks[i].timestamp);
    out.plot_ids.push_back(picks[i].plot);
  }
  out.images = Tensor::from({b, 3, s, s}, std::move(images));
  out.plots = Tensor::from({b, 3, q, q}, std::move(plots));
  return out;
}

std::vector<PairBatch> make_pair_batches(const PairDataset& ds, std::size_t batch_size, std::uint64_t seed,
                                         std::size_t epoch) {
  std::vector<PairBatch> out;
  for (const auto& picks : plan_pair_batches(ds, batch_size, seed, epoch)) out.push_back(materialize(ds, picks));
  return out;
}

}  // namespace pimc
