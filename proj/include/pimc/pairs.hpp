#pragma once

#include <cstdint>
#include <vector>

#include "pimc/cube.hpp"
#include "pimc/hilbert.hpp"
#include "pimc/recurrence.hpp"
#include "pimc/series.hpp"
#include "pimc/tensor.hpp"

namespace pimc {

/// One patch with everything needed to pair it: the RGB stack over all
/// timestamps and the plots of its sampled pixels, at the encoder sizes.
struct PatchSample {
  PatchRef patch;
  std::size_t timestamps = 0;
  std::vector<float> rgb;         // timestamps x 3 x image_size^2, channels R, G, B
  std::vector<RpImage> plots;     // 3 x plot_size^2 each
  std::int32_t label = -1;        // majority pixel label when known
};

struct PairDataset {
  std::size_t image_size = 0;  // image encoder input side
  std::size_t plot_size = 0;   // series encoder input side
  std::vector<PatchSample> patches;

  std::size_t pair_count() const;
};

/// Builds PatchSamples for the given series sets (one set per patch) of a
/// cube. Plots and RGB patches are bilinearly resampled to the dataset sizes.
void append_patches(PairDataset& ds, const SitsCube& cube, const std::vector<IndexSeriesSet>& sets,
                    const LabelRaster* labels = nullptr);

/// Same, sampling `m` pixels per patch of a ps-grid.
PairDataset build_pair_dataset(const SitsCube& cube, std::size_t ps, std::size_t m, std::size_t image_size,
                               std::size_t plot_size, SamplingMode mode, std::uint64_t seed, const LabelRaster* labels = nullptr);

/// Images and plots of one step; plots[i] comes from a pixel inside images[i].
struct PairBatch {
  Tensor images;  // b x 3 x image_size x image_size
  Tensor plots;   // b x 3 x plot_size x plot_size
  std::vector<std::size_t> patch_ids;
  std::vector<std::size_t> timestamps;
  std::vector<std::size_t> plot_ids;
};

struct PairPick {
  std::size_t patch = 0;
  std::size_t timestamp = 0;
  std::size_t plot = 0;
};

/// The epoch's batch plan: patches shuffled under (seed, epoch), one random
/// plot and one random timestamp per patch, each patch at most once per
/// batch. The last batch may be smaller.
std::vector<std::vector<PairPick>> plan_pair_batches(const PairDataset& ds, std::size_t batch_size,
                                                     std::uint64_t seed, std::size_t epoch);

PairBatch materialize(const PairDataset& ds, const std::vector<PairPick>& picks);

/// plan + materialize for a whole epoch.
std::vector<PairBatch> make_pair_batches(const PairDataset& ds, std::size_t batch_size, std::uint64_t seed,
                                         std::size_t epoch);

}  // namespace pimc
