#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pimc/cube.hpp"
#include "pimc/encoder.hpp"
#include "pimc/metrics.hpp"
#include "pimc/pairs.hpp"
#include "pimc/probe.hpp"
#include "pimc/series.hpp"

namespace pimc {

/// Encoder-ready samples: count x 3 x s x s inputs plus labels or forecast targets.
struct SampleSet {
  std::size_t size = 0;
  std::size_t count = 0;
  std::vector<float> inputs;
  std::vector<std::int32_t> labels;
  // Forecasting: targets are (future - anchor) / scale per index channel,
  // where anchor is the last context value and scale the context range.
  std::size_t horizon = 0;
  std::vector<float> targets;  // count x 3 x horizon
  std::vector<float> future;   // count x 3 x horizon, index units
  std::vector<float> anchors;  // count x 3
  std::vector<float> scales;   // count x 3
  std::size_t skipped = 0;
};

/// One plot per sampled pixel, labelled from the raster. Pixels whose label
/// is negative or listed in `ignore` are dropped.
SampleSet pixel_samples(const std::vector<IndexSeriesSet>& sets, const LabelRaster& labels, std::size_t s,
                        std::span<const std::int32_t> ignore = {});

struct ForecastWindow {
  std::size_t context = 32;
  std::size_t horizon = 10;
  std::size_t stride = 0;  // 0 = one window per series, starting at 0
};

/// Windows over `count` series of 3 x n values. Series shorter than
/// context + horizon are skipped and counted.
SampleSet forecast_samples(std::span<const float> series, std::size_t count, std::size_t n, std::size_t s,
                           const ForecastWindow& window);
SampleSet forecast_samples(const std::vector<IndexSeriesSet>& sets, std::size_t s, const ForecastWindow& window);

/// RGB patches with their majority label at `per_patch` evenly spaced timestamps.
SampleSet landcover_samples(const PairDataset& ds, std::size_t per_patch = 1);

struct ProbeOutcome {
  MetricsReport report;
  ProbeHead head;
  std::optional<EncoderParams> tuned;  // fine-tuned copy of the encoder
  double train_accuracy = 0.0;         // classifiers only
  std::vector<float> test_outputs;     // raw head outputs
};

/// The probe never modifies `encoder`; fine-tuning works on a copy.
ProbeOutcome classify_pixels(EncoderParams& series_encoder, const SampleSet& train, const SampleSet& test,
                             HeadConfig config);
ProbeOutcome forecast_index(EncoderParams& series_encoder, const SampleSet& train, const SampleSet& test,
                            HeadConfig config);
ProbeOutcome classify_landcover(EncoderParams& image_encoder, const SampleSet& train, const SampleSet& test,
                                HeadConfig config);

}  // namespace pimc
