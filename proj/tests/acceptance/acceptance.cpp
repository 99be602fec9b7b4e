// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <spdlog/spdlog.h>
#include <string>
#include <vector>

#include "cli.hpp"
#include "grad_cases.hpp"
#include "pimc/downstream.hpp"
#include "pimc/hilbert.hpp"
#include "pimc/indices.hpp"
#include "pimc/recurrence.hpp"
#include "pimc/synth.hpp"
#include "pimc/trainer.hpp"

using namespace pimc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

// Pretraining setup shared by the learnability, probing and forecasting checks.
constexpr std::size_t kPatchSide = 16;
constexpr std::size_t kPixelsPerPatch = 8;
constexpr std::size_t kImageSize = 16;
constexpr std::size_t kPlotSize = 32;
constexpr std::uint64_t kFirstTrainCube = 100;
constexpr std::size_t kTrainCubes = 48;
constexpr std::uint64_t kFirstTestCube = kFirstTrainCube + kTrainCubes;
constexpr std::size_t kTestCubes = 4;
constexpr std::size_t kProbeTrainCubes = 4;

SynthResult cube(std::uint64_t seed) {
  SynthOptions o;
  o.seed = seed;
  o.h = o.w = 128;
  o.field = 16;
  return synth_cube(o);
}

std::vector<IndexSeriesSet> patch_series(const SitsCube& c, std::uint64_t seed) {
  std::vector<IndexSeriesSet> sets;
  const auto grid = slice_patches(c, kPatchSide);
  for (std::size_t k = 0; k < grid.patches.size(); ++k) {
    sets.push_back(extract_patch_series(c, grid.patches[k], kPatchSide, SamplingMode::Hilbert, kPixelsPerPatch, seed + k));
  }
  return sets;
}

PairDataset pairs(std::uint64_t first, std::size_t count) {
  PairDataset ds;
  ds.image_size = kImageSize;
  ds.plot_size = kPlotSize;
  for (std::size_t i = 0; i < count; ++i) {
    const auto r = cube(first + i);
    append_patches(ds, r.cube, patch_series(r.cube, first + i), &r.labels);
  }
  return ds;
}

SampleSet pixels(std::uint64_t first, std::size_t count) {
  SampleSet all;
  for (std::size_t i = 0; i < count; ++i) {
    const auto r = cube(first + i);
    auto p = pixel_samples(patch_series(r.cube, first + i), r.labels, kPlotSize);
    all.size = p.size;
    all.count += p.count;
    all.inputs.insert(all.inputs.end(), p.inputs.begin(), p.inputs.end());
    all.labels.insert(all.labels.end(), p.labels.begin(), p.labels.end());
  }
  return all;
}

TrainConfig pretrain_config() {
  auto c = TrainConfig::desk(kImageSize, kPlotSize);
  c.seed = 7;
  c.batch_size = 64;
  for (auto* e : {&c.image_encoder, &c.series_encoder}) {
    e->widths = {8, 16, 32, 64};
    e->embed_dim = 256;
  }
  return c;
}

std::vector<MetricsReport> g_reports;

// ---------------------------------------------------------------- 1

std::vector<float> brute_force_rp(const std::vector<float>& x) {
  const std::size_t n = x.size();
  std::vector<float> out(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = std::fabs(x[i] - x[j]);
  return out;
}

Verdict recurrence_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(8, 64);
  std::uniform_int_distribution<int> tick(-4096, 4096);
  std::uniform_int_distribution<int> shift(-8, 8);
  std::size_t bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = len(rng);
    // Values on a 1/4096 grid: differences and integer shifts are exact in f32.
    std::vector<float> x(n);
    for (auto& v : x) v = static_cast<float>(tick(rng)) / 4096.0f;
    const auto rp = recurrence_plot(x);
    bool ok = rp == brute_force_rp(x);
    for (std::size_t i = 0; i < n && ok; ++i) {
      ok = rp[i * n + i] == 0.0f;
      for (std::size_t j = 0; j < i && ok; ++j) ok = rp[i * n + j] == rp[j * n + i];
    }
    const float c = static_cast<float>(shift(rng));
    for (auto& v : x) v += c;
    ok = ok && recurrence_plot(x) == rp;
    bad += !ok;
  }
  const double sec = seconds_since(t0);
  return {bad == 0 && sec < 5.0, fmt::format("1000 series, {} mismatches, {:.2f} s (limit 5 s)", bad, sec)};
}

// ---------------------------------------------------------------- 2

Verdict hilbert_properties() {
  const auto t0 = Clock::now();
  std::size_t bad = 0;
  for (std::size_t ps : {2, 4, 8, 16, 32}) {
    const auto order = hilbert_order(ps);
    std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
    for (const auto& p : order) {
      if (p.x >= ps || p.y >= ps) ++bad;
      seen.insert({p.x, p.y});
    }
    if (order.size() != ps * ps || seen.size() != ps * ps) ++bad;
    for (std::size_t i = 1; i < order.size(); ++i) {
      const long dx = std::labs(long(order[i].x) - long(order[i - 1].x));
      const long dy = std::labs(long(order[i].y) - long(order[i - 1].y));
      if (dx + dy != 1) ++bad;
    }
  }
  const double sec = seconds_since(t0);
  return {bad == 0 && sec < 1.0, fmt::format("ps 2..32, {} violations, {:.3f} s (limit 1 s)", bad, sec)};
}

// ---------------------------------------------------------------- 3

Verdict index_bounds() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<float> refl(0.0f, 1.0f);
  std::size_t bad = 0;
  double lo = 0.0, hi = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    const float b = refl(rng), r = refl(rng), n = refl(rng);
    const float a = ndvi(n, r), s = savi(n, r), e = evi(n, r, b);
    lo = std::min({lo, double(a), double(s)});
    hi = std::max({hi, double(a), double(s)});
    if (!(a >= -1.0f - 1e-6f && a <= 1.0f + 1e-6f) || !(s >= -1.0f - 1e-6f && s <= 1.0f + 1e-6f) || !std::isfinite(e)) ++bad;
  }
  const double sec = seconds_since(t0);
  return {bad == 0 && sec < 2.0,
          fmt::format("1e6 triples, range [{:.4f}, {:.4f}], {} violations, {:.2f} s (limit 2 s)", lo, hi, bad, sec)};
}

// ---------------------------------------------------------------- 4

Verdict gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_name;
  std::size_t cases = 0;
  for (const auto& c : testing::gradient_cases()) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = c.run(1000 + seed);
      if (r.worst_relative > worst) {
        worst = r.worst_relative;
        worst_name = c.name;
      }
    }
    ++cases;
  }
  const double sec = seconds_since(t0);
  return {worst < 1e-2 && sec < 60.0,
          fmt::format("{} ops x 20 instances, worst relative error {:.2e} ({}), {:.1f} s (limits 1e-2, 60 s)", cases, worst,
                      worst_name, sec)};
}

// ---------------------------------------------------------------- 5

Verdict loss_calibration(const PairDataset& ds) {
  const auto cfg = pretrain_config();
  bool pass = true;
  std::string detail;
  for (std::size_t b : {8, 32, 64}) {
    auto image = init_encoder(cfg.image_encoder, cfg.seed);
    auto series = init_encoder(cfg.series_encoder, cfg.seed + 1);
    const auto picks = plan_pair_batches(ds, b, cfg.seed, 0).front();
    // Every plot paired with the next patch's image.
    auto shuffled = picks;
    for (std::size_t i = 0; i < b; ++i) shuffled[i].patch = picks[(i + 1) % b].patch;
    const auto matched = materialize(ds, picks);
    const auto mixed = materialize(ds, shuffled);
    autograd::NoGradGuard guard;
    const auto fi = encode(image, matched.images, true);
    const auto ft = encode(series, mixed.plots, true);
    const double loss = pimc_loss(similarity_matrix(fi, ft, cfg.temp_init)).item();
    const double ref = std::log(double(b));
    pass = pass && std::abs(loss - ref) <= 0.1 * ref;
    detail += fmt::format("b={} loss {:.3f} vs ln b {:.3f}; ", b, loss, ref);
  }
  detail += "tolerance 10%";
  return {pass, detail};
}

// ---------------------------------------------------------------- 6

Verdict learnability(const TrainResult& model, const PairDataset& test, double train_sec) {
  const double final_loss = model.state.epoch_loss.back();
  const double limit = 0.5 * std::log(64.0);
  const auto batch = materialize(test, plan_pair_batches(test, 256, 1, 0).front());
  auto m = model;
  const auto r = cross_modal_retrieval(m.image, m.series, batch);
  const bool pass = final_loss < limit && r.plot_to_image > 0.6 && r.image_to_plot > 0.6 && r.pairs == 256;
  return {pass, fmt::format("train loss {:.3f} (< {:.3f}), top-1 retrieval plot->image {:.3f} image->plot {:.3f} on {} "
                            "held-out pairs (> 0.60), {:.0f} s",
                            final_loss, limit, r.plot_to_image, r.image_to_plot, r.pairs, train_sec)};
}

// ---------------------------------------------------------------- 7, 8

struct ProbeRun {
  double frozen = 0.0;
  double random = 0.0;
  double tuned = 0.0;
};

std::vector<ProbeRun> probe_runs(EncoderParams& series, const SampleSet& train, const SampleSet& test) {
  std::vector<ProbeRun> runs;
  for (std::uint64_t seed : {0, 1, 2}) {
    HeadConfig hc;
    hc.seed = seed;
    hc.finetune_epochs = 5;
    ProbeRun run;
    hc.mode = AttachMode::Frozen;
    auto frozen = classify_pixels(series, train, test, hc);
    run.frozen = frozen.report.classification->balanced_accuracy;
    auto blank = init_encoder(series.config, 1000 + seed);
    auto random = classify_pixels(blank, train, test, hc);
    run.random = random.report.classification->balanced_accuracy;
    hc.mode = AttachMode::Finetune;
    auto tuned = classify_pixels(series, train, test, hc);
    run.tuned = tuned.report.classification->balanced_accuracy;
    for (auto* o : {&frozen, &random, &tuned}) g_reports.push_back(o->report);
    runs.push_back(run);
  }
  return runs;
}

Verdict frozen_superiority(const std::vector<ProbeRun>& runs) {
  bool pass = true;
  std::string detail;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    const auto& r = runs[s];
    pass = pass && r.frozen > 0.80 && r.frozen - r.random >= 0.15;
    detail += fmt::format("seed {} frozen {:.3f} random {:.3f} gap {:+.3f}; ", s, r.frozen, r.random, r.frozen - r.random);
  }
  detail += "need frozen > 0.80 and gap >= 0.15";
  return {pass, detail};
}

Verdict finetune_gain(const std::vector<ProbeRun>& runs) {
  bool pass = true;
  std::string detail;
  for (std::size_t s = 0; s < runs.size(); ++s) {
    pass = pass && runs[s].tuned >= runs[s].frozen;
    detail += fmt::format("seed {} fine-tuned {:.4f} frozen {:.4f}; ", s, runs[s].tuned, runs[s].frozen);
  }
  detail += "balanced accuracy";
  return {pass, detail};
}

// ---------------------------------------------------------------- 9

// Three index channels sharing period and phase. Phases lie in (0.1, 0.9) pi,
// which rules out contexts that are mirror images of each other.
std::vector<float> sinusoids(std::size_t count, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  constexpr double amp[3] = {0.25, 0.20, 0.15};
  constexpr double offset[3] = {0.40, 0.30, 0.25};
  std::vector<float> out;
  out.reserve(count * kIndexChannels * n);
  for (std::size_t k = 0; k < count; ++k) {
    const double period = 12.0 + 28.0 * u(rng);
    const double phase = M_PI * (0.1 + 0.8 * u(rng));
    for (std::size_t c = 0; c < kIndexChannels; ++c) {
      const double a = amp[c] * (0.6 + 0.8 * u(rng));
      for (std::size_t t = 0; t < n; ++t) out.push_back(float(offset[c] + a * std::sin(2.0 * M_PI * t / period + phase)));
    }
  }
  return out;
}

Verdict forecasting(EncoderParams& series) {
  ForecastWindow w;
  w.context = 32;
  w.horizon = 10;
  const std::size_t n = w.context + w.horizon;
  const auto train = forecast_samples(sinusoids(2048, n, 21), 2048, n, kPlotSize, w);
  const auto test = forecast_samples(sinusoids(512, n, 22), 512, n, kPlotSize, w);
  HeadConfig hc;
  hc.hidden = 256;
  auto r = forecast_index(series, train, test, hc);
  g_reports.push_back(r.report);

  bool pass = true;
  std::string detail;
  for (const auto& m : r.report.regression) {
    if (m.name == "overall") continue;
    pass = pass && m.mae <= 0.02;
    detail += fmt::format("{} MAE {:.4f}; ", m.name, m.mae);
  }
  double worst = 0.0;
  std::size_t rows = 0;
  for (const auto& rep : g_reports) {
    for (const auto& m : rep.regression) {
      worst = std::max(worst, std::abs(m.rmse * m.rmse - m.mse));
      ++rows;
    }
  }
  pass = pass && worst <= 1e-9 && rows > 0;
  detail += fmt::format("limit 0.02; |RMSE^2 - MSE| <= {:.1e} over {} regression rows in {} reports", worst, rows,
                        g_reports.size());
  return {pass, detail};
}

// ---------------------------------------------------------------- 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  return {std::istreambuf_iterator<char>(in), {}};
}

int pipeline(const fs::path& root) {
  auto run = [](std::vector<std::string> args) {
    args.insert(args.begin(), {"pimc", "--log-level", "warn"});
    return cli::run(args);
  };
  const std::string data = (root / "data").string(), ex = (root / "extract").string();
  const std::string model = (root / "train").string(), eval = (root / "eval").string();
  const std::string common_seed = "5";
  if (int rc = run({"synthdata", "--out", data, "--seed", common_seed, "--size", "64", "--field", "16", "--train-regions", "3",
                    "--test-regions", "1"}))
    return rc;
  if (int rc = run({"extract", "--manifest", data + "/manifest.json", "--out", ex, "--ps", "16", "--pixels", "8",
                    "--plot-size", "32"})) return rc;
  if (int rc = run({"train", "--data", ex, "--out", model, "--seed", common_seed, "--workers", "1", "--epochs", "5",
                    "--batch", "16", "--plot-size", "32", "--widths", "8,16,32,64"}))
    return rc;
  return run({"eval", "--task", "pixel-cls", "--checkpoint", model + "/checkpoints/final", "--data", ex, "--out", eval,
              "--seed", common_seed, "--workers", "1", "--head-epochs", "20"});
}

Verdict determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  const fs::path a = work / "pipeline_a", b = work / "pipeline_b";
  fs::remove_all(a);
  fs::remove_all(b);
  const int ra = pipeline(a), rb = pipeline(b);
  if (ra != 0 || rb != 0) return {false, fmt::format("pipeline exit codes {} and {}", ra, rb)};
  std::size_t same = 0, total = 0;
  std::string diff;
  for (const char* f : {"train/loss.csv", "eval/metrics.json", "eval/metrics.csv", "eval/confusion.csv"}) {
    const auto x = slurp(a / f), y = slurp(b / f);
    ++total;
    if (!x.empty() && x == y) {
      ++same;
    } else {
      diff += std::string(" ") + f;
    }
  }
  return {same == total, fmt::format("{}/{} files byte-identical{}{}, {:.0f} s", same, total, diff.empty() ? "" : ", differ:",
                                     diff, seconds_since(t0))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  fs::path work = fs::temp_directory_path() / "pimc_acceptance";
  std::vector<int> only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);
  fs::create_directories(work);

  auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  int failed = 0, ran = 0;
  auto report = [&](int k, const char* title, const Verdict& v) {
    ++ran;
    failed += !v.pass;
    std::printf("criterion %2d %s  %s: %s\n", k, v.pass ? "PASS" : "FAIL", title, v.detail.c_str());
    std::fflush(stdout);
  };
  auto guarded = [&](int k, const char* title, const std::function<Verdict()>& f) {
    if (!wanted(k)) return;
    try {
      report(k, title, f());
    } catch (const std::exception& e) {
      report(k, title, {false, std::string("error: ") + e.what()});
    }
  };

  guarded(1, "recurrence-plot oracle", recurrence_oracle);
  guarded(2, "Hilbert order", hilbert_properties);
  guarded(3, "index bounds", index_bounds);
  guarded(4, "gradient suite", gradient_suite);

  const bool need_model = wanted(6) || wanted(7) || wanted(8) || wanted(9);
  if (wanted(5) || need_model) {
    const auto train_set = pairs(kFirstTrainCube, kTrainCubes);
    guarded(5, "loss calibration", [&] { return loss_calibration(train_set); });
    if (need_model) {
      std::optional<TrainResult> model;
      double train_sec = 0.0;
      try {
        const auto t0 = Clock::now();
        model = train(train_set, pretrain_config());
        train_sec = seconds_since(t0);
      } catch (const std::exception& e) {
        for (int k : {6, 7, 8, 9})
          if (wanted(k)) report(k, "pretraining", {false, std::string("error: ") + e.what()});
      }
      if (model) {
        const auto test_set = pairs(kFirstTestCube, kTestCubes);
        guarded(6, "contrastive learnability", [&] { return learnability(*model, test_set, train_sec); });
        if (wanted(7) || wanted(8)) {
          std::vector<ProbeRun> runs;
          std::string error;
          try {
            runs = probe_runs(model->series, pixels(kFirstTrainCube, kProbeTrainCubes), pixels(kFirstTestCube, kTestCubes));
          } catch (const std::exception& e) {
            error = e.what();
          }
          guarded(7, "frozen-probe superiority", [&] {
            return error.empty() ? frozen_superiority(runs) : Verdict{false, "error: " + error};
          });
          guarded(8, "fine-tune gain", [&] { return error.empty() ? finetune_gain(runs) : Verdict{false, "error: " + error}; });
        }
        guarded(9, "forecasting", [&] { return forecasting(model->series); });
      }
    }
  }
  guarded(10, "pipeline determinism", [&] { return determinism(work); });

  std::printf("acceptance: %d/%d passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
