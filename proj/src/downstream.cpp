#include "pimc/downstream.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <spdlog/spdlog.h>

#include "pimc/errors.hpp"
#include "pimc/recurrence.hpp"

namespace pimc {

namespace {

void append_plot(SampleSet& out, std::span<const float> series, std::size_t n, PixelCoord pixel) {
  auto rp = stack_channels(series, n, pixel);
  if (rp.n != out.size) rp = resize_rp(rp, out.size);
  out.inputs.insert(out.inputs.end(), rp.data.begin(), rp.data.end());
  ++out.count;
}

}  // namespace

SampleSet pixel_samples(const std::vector<IndexSeriesSet>& sets, const LabelRaster& labels, std::size_t s,
                        std::span<const std::int32_t> ignore) {
  SampleSet out;
  out.size = s;
  for (const auto& set : sets) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto px = set.pixels[i];
      const auto label = labels.at(px.y, px.x);
      if (label < 0 || std::find(ignore.begin(), ignore.end(), label) != ignore.end()) continue;
      append_plot(out, set.pixel_series(i), set.n, px);
      out.labels.push_back(label);
    }
  }
  return out;
}

SampleSet forecast_samples(std::span<const float> series, std::size_t count, std::size_t n, std::size_t s,
                           const ForecastWindow& window) {
  if (window.horizon == 0) throw DomainError("forecast: horizon must be >= 1");
  if (window.context < 2) throw DomainError("forecast: context must be >= 2");
  if (series.size() != count * kIndexChannels * n) throw DimensionError("forecast_samples: expected count x 3 x n");
  SampleSet out;
  out.size = s;
  out.horizon = window.horizon;
  const std::size_t need = window.context + window.horizon;
  if (n < need) {
    out.skipped = count;
    return out;
  }
  std::vector<float> ctx(kIndexChannels * window.context);
  for (std::size_t k = 0; k < count; ++k) {
    const auto one = series.subspan(k * kIndexChannels * n, kIndexChannels * n);
    for (std::size_t start = 0; start + need <= n; start += window.stride ? window.stride : n) {
      for (std::size_t c = 0; c < kIndexChannels; ++c) {
        const auto ch = one.subspan(c * n + start, need);
        std::copy_n(ch.begin(), window.context, ctx.begin() + static_cast<std::ptrdiff_t>(c * window.context));
        const auto [lo, hi] = std::minmax_element(ch.begin(), ch.begin() + static_cast<std::ptrdiff_t>(window.context));
        const float anchor = ch[window.context - 1];
        const float range = *hi - *lo;
        const float scale = range > 1e-6f ? range : 1.0f;
        out.anchors.push_back(anchor);
        out.scales.push_back(scale);
        for (std::size_t h = 0; h < window.horizon; ++h) {
          const float v = ch[window.context + h];
          out.future.push_back(v);
          out.targets.push_back((v - anchor) / scale);
        }
      }
      append_plot(out, ctx, window.context, {});
    }
  }
  return out;
}

SampleSet forecast_samples(const std::vector<IndexSeriesSet>& sets, std::size_t s, const ForecastWindow& window) {
  SampleSet out;
  out.size = s;
  out.horizon = window.horizon;
  for (const auto& set : sets) {
    auto part = forecast_samples(set.series, set.size(), set.n, s, window);
    out.count += part.count;
    out.skipped += part.skipped;
    auto cat = [](std::vector<float>& a, const std::vector<float>& b) { a.insert(a.end(), b.begin(), b.end()); };
    cat(out.inputs, part.inputs);
    cat(out.targets, part.targets);
    cat(out.future, part.future);
    cat(out.anchors, part.anchors);
    cat(out.scales, part.scales);
  }
  if (out.skipped > 0) spdlog::warn("forecast: {} series shorter than context + horizon skipped", out.skipped);
  return out;
}

SampleSet landcover_samples(const PairDataset& ds, std::size_t per_patch) {
  if (per_patch == 0) throw DomainError("landcover_samples: per_patch must be positive");
  SampleSet out;
  out.size = ds.image_size;
  const std::size_t plane = 3 * ds.image_size * ds.image_size;
  for (const auto& p : ds.patches) {
    if (p.label < 0) {
      ++out.skipped;
      continue;
    }
    const std::size_t picks = std::min(per_patch, p.timestamps);
    for (std::size_t j = 0; j < picks; ++j) {
      const std::size_t ts = (2 * j + 1) * p.timestamps / (2 * picks);
      const auto first = p.rgb.begin() + static_cast<std::ptrdiff_t>(ts * plane);
      out.inputs.insert(out.inputs.end(), first, first + static_cast<std::ptrdiff_t>(plane));
      out.labels.push_back(p.label);
      ++out.count;
    }
  }
  return out;
}

namespace {

void check_set(const SampleSet& set, const EncoderParams& enc, const char* what) {
  if (set.count == 0) throw DomainError(std::string(what) + ": no samples");
  if (set.size != enc.config.input_size) {
    throw DimensionError(std::string(what) + ": samples are " + std::to_string(set.size) + " px, encoder expects " +
                         std::to_string(enc.config.input_size));
  }
}

struct Fitted {
  ProbeHead head;
  std::optional<EncoderParams> tuned;
  std::vector<float> train_features;
  std::vector<float> test_features;
};

Fitted fit_probe(EncoderParams& encoder, const SampleSet& train, const SampleSet& test, const HeadConfig& config,
                 const ProbeTargets& targets) {
  Fitted f;
  const std::size_t d = encoder.config.embed_dim;
  f.train_features = embed_all(encoder, train.inputs, train.count);
  f.head = init_head(config, d, config.seed);
  fit_standardization(f.head, f.train_features, train.count);
  train_head(f.head, f.train_features, train.count, targets);
  EncoderParams* used = &encoder;
  if (config.mode == AttachMode::Finetune) {
    f.tuned = encoder.clone();
    finetune(f.head, *f.tuned, train.inputs, train.count, targets);
    used = &*f.tuned;
    f.train_features = embed_all(*used, train.inputs, train.count);
  }
  f.test_features = embed_all(*used, test.inputs, test.count);
  return f;
}

ProbeOutcome classify(EncoderParams& encoder, const SampleSet& train, const SampleSet& test, HeadConfig config,
                      const char* task) {
  check_set(train, encoder, task);
  check_set(test, encoder, task);
  if (train.labels.size() != train.count || test.labels.size() != test.count) {
    throw DimensionError(std::string(task) + ": one label per sample required");
  }
  const std::set<std::int32_t> seen(train.labels.begin(), train.labels.end());
  const std::vector<std::int32_t> classes(seen.begin(), seen.end());
  if (classes.size() < 2) throw DomainError(std::string(task) + ": training split holds fewer than 2 classes");
  std::map<std::int32_t, std::size_t> slot;
  for (std::size_t i = 0; i < classes.size(); ++i) slot[classes[i]] = i;

  ProbeTargets targets;
  for (auto l : train.labels) targets.classes.push_back(slot.at(l));
  config.kind = HeadKind::Classifier;
  config.outputs = classes.size();
  auto fitted = fit_probe(encoder, train, test, config, targets);

  ProbeOutcome out;
  out.head = fitted.head;
  out.tuned = std::move(fitted.tuned);
  const std::size_t k = classes.size();
  const auto train_pred = argmax_rows(head_outputs(out.head, fitted.train_features, train.count), train.count, k);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < train.count; ++i) hits += train_pred[i] == targets.classes[i];
  out.train_accuracy = static_cast<double>(hits) / static_cast<double>(train.count);

  out.test_outputs = head_outputs(out.head, fitted.test_features, test.count);
  const auto test_pred = argmax_rows(out.test_outputs, test.count, k);
  std::vector<std::int32_t> predicted(test.count);
  for (std::size_t i = 0; i < test.count; ++i) predicted[i] = classes[test_pred[i]];

  auto metrics = classification_metrics(test.labels, predicted, classes);
  std::set<std::int32_t> excluded;
  for (auto l : test.labels)
    if (!seen.count(l)) excluded.insert(l);
  if (!excluded.empty()) spdlog::warn("{}: {} test classes absent from the training split excluded", task, excluded.size());
  metrics.excluded.assign(excluded.begin(), excluded.end());

  out.report.task = task;
  out.report.mode = attach_name(config.mode);
  out.report.samples = test.count;
  out.report.skipped = test.skipped;
  for (auto l : test.labels) out.report.skipped += excluded.count(l);
  out.report.classification = std::move(metrics);
  return out;
}

}  // namespace

ProbeOutcome classify_pixels(EncoderParams& series_encoder, const SampleSet& train, const SampleSet& test,
                             HeadConfig config) {
  return classify(series_encoder, train, test, std::move(config), "pixel-cls");
}

ProbeOutcome classify_landcover(EncoderParams& image_encoder, const SampleSet& train, const SampleSet& test,
                                HeadConfig config) {
  return classify(image_encoder, train, test, std::move(config), "landcover");
}

ProbeOutcome forecast_index(EncoderParams& series_encoder, const SampleSet& train, const SampleSet& test,
                            HeadConfig config) {
  check_set(train, series_encoder, "forecast");
  check_set(test, series_encoder, "forecast");
  if (train.horizon == 0 || train.horizon != test.horizon) throw DimensionError("forecast: horizon mismatch");
  const std::size_t width = kIndexChannels * train.horizon;
  config.kind = HeadKind::Forecaster;
  config.outputs = width;
  ProbeTargets targets;
  targets.values = train.targets;
  auto fitted = fit_probe(series_encoder, train, test, config, targets);

  ProbeOutcome out;
  out.head = fitted.head;
  out.tuned = std::move(fitted.tuned);
  out.test_outputs = head_outputs(out.head, fitted.test_features, test.count);

  static const char* names[kIndexChannels] = {"ndvi", "evi", "savi"};
  std::vector<std::vector<float>> pred(kIndexChannels), truth(kIndexChannels);
  std::vector<float> all_pred, all_truth;
  for (std::size_t i = 0; i < test.count; ++i) {
    for (std::size_t c = 0; c < kIndexChannels; ++c) {
      const std::size_t row = i * kIndexChannels + c;
      for (std::size_t h = 0; h < train.horizon; ++h) {
        const std::size_t at = row * train.horizon + h;
        const float p = test.anchors[row] + test.scales[row] * out.test_outputs[at];
        pred[c].push_back(p);
        truth[c].push_back(test.future[at]);
        all_pred.push_back(p);
        all_truth.push_back(test.future[at]);
      }
    }
  }
  out.report.task = "forecast";
  out.report.mode = attach_name(config.mode);
  out.report.samples = test.count;
  out.report.skipped = test.skipped;
  for (std::size_t c = 0; c < kIndexChannels; ++c) out.report.regression.push_back(regression_metrics(names[c], pred[c], truth[c]));
  out.report.regression.push_back(regression_metrics("overall", all_pred, all_truth));
  return out;
}

}  // namespace pimc
