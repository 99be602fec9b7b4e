#include <doctest.h>

#include <cmath>
#include <random>

#include "pimc/downstream.hpp"
#include "pimc/errors.hpp"
#include "pimc/ops.hpp"
#include "pimc/probe.hpp"
#include "pimc/synth.hpp"

using namespace pimc;

namespace {

EncoderParams small_encoder(std::size_t s, std::uint64_t seed) {
  EncoderConfig c;
  c.widths = {4, 8};
  c.blocks_per_stage = 1;
  c.embed_dim = 8;
  c.input_size = s;
  return init_encoder(c, seed);
}

SampleSet pixels_of(std::uint64_t seed, std::size_t classes = 2) {
  SynthOptions o;
  o.seed = seed;
  o.classes = classes;
  o.h = o.w = 32;
  o.field = 8;
  o.t = 16;
  const auto r = synth_cube(o);
  std::vector<IndexSeriesSet> sets;
  for (const auto& p : slice_patches(r.cube, 8).patches)
    sets.push_back(extract_patch_series(r.cube, p, 8, SamplingMode::Hilbert, 4, 0));
  return pixel_samples(sets, r.labels, 16);
}

}  // namespace

TEST_CASE("a linear head separates separable features") {
  std::mt19937_64 rng(1);
  std::normal_distribution<float> g;
  const std::size_t n = 200, d = 4;
  std::vector<float> x(n * d);
  ProbeTargets t;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % 3;
    t.classes.push_back(c);
    for (std::size_t k = 0; k < d; ++k) x[i * d + k] = 100.0f + 0.2f * g(rng) + (k == c ? 3.0f : 0.0f);
  }
  HeadConfig hc;
  hc.outputs = 3;
  hc.epochs = 60;
  hc.lr = 1e-2f;
  auto head = init_head(hc, d, 0);
  fit_standardization(head, x, n);
  train_head(head, x, n, t);
  const auto pred = argmax_rows(head_outputs(head, x, n), n, 3);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < n; ++i) ok += pred[i] == t.classes[i];
  CHECK(double(ok) / n > 0.95);
}

TEST_CASE("standardization uses train statistics") {
  HeadConfig hc;
  hc.outputs = 2;
  auto head = init_head(hc, 2, 0);
  const std::vector<float> x{1, 10, 3, 10, 5, 10};
  fit_standardization(head, x, 3);
  auto y = ops::linear(Tensor::from({1, 2}, {3, 10}), head.standardize_weight, head.standardize_bias);
  CHECK(y.at(0) == doctest::Approx(0.0f).epsilon(1e-6));
  CHECK(std::isfinite(y.at(1)));
  CHECK(head.trainable().size() == 2);
}

TEST_CASE("frozen probing leaves the encoder untouched") {
  auto enc = small_encoder(16, 4);
  const auto sum = enc.checksum();
  const auto train = pixels_of(1), test = pixels_of(2);
  HeadConfig hc;
  hc.outputs = 2;
  hc.epochs = 5;
  const auto out = classify_pixels(enc, train, test, hc);
  CHECK(enc.checksum() == sum);
  CHECK(out.report.task == "pixel-cls");
  CHECK(out.report.mode == "frozen");
  CHECK(out.report.samples == test.count);
  hc.mode = AttachMode::Finetune;
  hc.finetune_epochs = 2;
  const auto tuned = classify_pixels(enc, train, test, hc);
  CHECK(enc.checksum() == sum);
  REQUIRE(tuned.tuned.has_value());
  CHECK(tuned.tuned->checksum() != sum);
}

TEST_CASE("classes missing from the train split are excluded") {
  auto enc = small_encoder(16, 4);
  auto train = pixels_of(1, 3);
  const auto test = pixels_of(2, 3);
  // drop class 2 from train
  SampleSet kept = train;
  kept.inputs.clear();
  kept.labels.clear();
  kept.count = 0;
  const std::size_t per = 3 * 16 * 16;
  for (std::size_t i = 0; i < train.count; ++i) {
    if (train.labels[i] == 2) continue;
    kept.inputs.insert(kept.inputs.end(), train.inputs.begin() + i * per, train.inputs.begin() + (i + 1) * per);
    kept.labels.push_back(train.labels[i]);
    ++kept.count;
  }
  HeadConfig hc;
  hc.outputs = 3;
  hc.epochs = 2;
  const auto out = classify_pixels(enc, kept, test, hc);
  REQUIRE(out.report.classification);
  CHECK(out.report.classification->excluded == std::vector<std::int32_t>{2});
}

TEST_CASE("forecast windows and targets") {
  const std::size_t n = 20;
  std::vector<float> s(3 * n);
  for (std::size_t t = 0; t < n; ++t) {
    s[t] = 0.1f * t;
    s[n + t] = 0.5f;
    s[2 * n + t] = std::sin(0.3f * t);
  }
  const auto w = forecast_samples(s, 1, n, 8, ForecastWindow{12, 5, 0});
  REQUIRE(w.count == 1);
  CHECK(w.size == 8);
  CHECK(w.horizon == 5);
  CHECK(w.future[0] == doctest::Approx(1.2f));
  CHECK(w.anchors[0] == doctest::Approx(1.1f));
  CHECK(w.scales[0] == doctest::Approx(1.1f));
  CHECK(w.targets[0] == doctest::Approx((1.2f - 1.1f) / 1.1f));
  CHECK(w.scales[1] == 1.0f);  // constant context
  CHECK(w.targets[5] == 0.0f);
  const auto strided = forecast_samples(s, 1, n, 8, ForecastWindow{12, 5, 1});
  CHECK(strided.count == 4);
  const auto short_ = forecast_samples(s, 1, n, 8, ForecastWindow{16, 5, 0});
  CHECK(short_.count == 0);
  CHECK(short_.skipped == 1);
}

TEST_CASE("forecast reports cover each index and the overall score") {
  auto enc = small_encoder(8, 2);
  const std::size_t n = 16, count = 12;
  std::vector<float> s(count * 3 * n);
  std::mt19937_64 rng(5);
  for (auto& v : s) v = std::uniform_real_distribution<float>(-1, 1)(rng);
  const auto set = forecast_samples(s, count, n, 8, ForecastWindow{10, 6, 0});
  HeadConfig hc;
  hc.kind = HeadKind::Forecaster;
  hc.outputs = 18;
  hc.epochs = 2;
  const auto out = forecast_index(enc, set, set, hc);
  REQUIRE(out.report.regression.size() == 4);
  CHECK(out.report.regression[0].name == "ndvi");
  CHECK(out.report.regression.back().name == "overall");
  CHECK(out.report.regression.back().count == count * 18);
  for (const auto& r : out.report.regression) CHECK(std::abs(r.rmse * r.rmse - r.mse) <= 1e-9);
  CHECK(out.test_outputs.size() == count * 18);
}
