#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <random>
#include <spdlog/spdlog.h>

#include "pimc/downstream.hpp"
#include "pimc/errors.hpp"
#include "pimc/manifest.hpp"
#include "pimc/metrics.hpp"
#include "pimc/pairs.hpp"
#include "pimc/recurrence.hpp"
#include "pimc/series.hpp"
#include "pimc/synth.hpp"
#include "pimc/trainer.hpp"

namespace pimc::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t workers = 1;
};

void add_common(CLI::App& sub, Common& c, bool needs_out = true) {
  sub.add_option("--config", c.config, "key = value file; command-line flags take precedence")
      ->check(CLI::ExistingFile);
  sub.add_option("--seed", c.seed, "seed of the run's random generator");
  auto* out = sub.add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  sub.add_option("--workers", c.workers, "worker threads (1 = fully deterministic)")->check(CLI::PositiveNumber);
}

// Flat key = value document applied to the options the command line left unset.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  CLI::ConfigINI reader;
  for (const auto& item : reader.from_file(path)) {
    if (!item.parents.empty() && item.parents.front() != sub.get_name()) continue;
    if (item.name == "config" || item.name == "++" || item.name == "--") continue;
    auto* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr) throw ConfigError(path + ": unknown key '" + item.name + "' for command " + sub.get_name());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

void write_resolved(CLI::App& sub, const fs::path& out) {
  fs::create_directories(out);
  std::ofstream f(out / (sub.get_name() + "_config.ini"), std::ios::trunc);
  f << sub.config_to_str(true, false);
}

void note_workers(std::size_t workers) {
  if (workers > 1) spdlog::warn("--workers {}: this build runs every stage on one thread", workers);
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::mt19937_64 g(seq);
  return g();
}

std::string region_name(std::size_t i) {
  return fmt::format("r{:03}", i);
}

SitsCube truncate_cube(SitsCube cube, std::size_t t) {
  if (t == 0 || t >= cube.t) return cube;
  cube.data.resize(t * cube.c * cube.h * cube.w);
  cube.timestamps.resize(t);
  cube.t = t;
  return cube;
}

// ---------------------------------------------------------------- extracted data

struct Extracted {
  fs::path dir;
  DatasetManifest manifest;
  std::size_t ps = 0;
  std::size_t series_len = 0;
  std::map<std::string, fs::path> series;  // region id -> series file
};

Extracted load_extract(const fs::path& dir) {
  const auto meta_path = dir / "extract.json";
  if (!fs::exists(meta_path)) {
    throw ConfigError("no extract.json in " + dir.string() + "; run 'extract' first");
  }
  std::ifstream in(meta_path);
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  Extracted ex;
  ex.dir = dir;
  ex.manifest = load_manifest(meta.at("manifest").get<std::string>());
  ex.ps = meta.at("ps").get<std::size_t>();
  ex.series_len = meta.value("series_len", std::size_t{0});
  for (const auto& r : meta.at("regions")) {
    ex.series[r.at("region_id").get<std::string>()] = dir / r.at("series").get<std::string>();
  }
  return ex;
}

struct Region {
  const ManifestEntry* entry = nullptr;
  SitsCube cube;
  std::optional<LabelRaster> labels;
  std::vector<IndexSeriesSet> sets;
};

Region load_region(const Extracted& ex, const ManifestEntry& e) {
  Region r;
  r.entry = &e;
  r.cube = truncate_cube(read_cube(e.cube), ex.series_len);
  r.cube.region_id = e.region_id;
  if (e.labels) r.labels = read_labels(*e.labels);
  auto it = ex.series.find(e.region_id);
  if (it == ex.series.end()) throw ConfigError("region " + e.region_id + " missing from the extraction");
  r.sets = load_series_sets(it->second);
  return r;
}

std::vector<const ManifestEntry*> eval_split(const DatasetManifest& m) {
  auto test = m.in_split(Split::Test);
  if (!test.empty()) return test;
  auto val = m.in_split(Split::Val);
  if (!val.empty()) {
    spdlog::warn("no test regions; evaluating on the validation split");
    return val;
  }
  throw ConfigError("manifest has neither test nor val regions to evaluate on");
}

PairDataset pair_dataset(const Extracted& ex, Split split, std::size_t image_size, std::size_t plot_size) {
  PairDataset ds;
  ds.image_size = image_size;
  ds.plot_size = plot_size;
  for (const auto* e : ex.manifest.in_split(split)) {
    auto r = load_region(ex, *e);
    append_patches(ds, r.cube, r.sets, r.labels ? &*r.labels : nullptr);
  }
  return ds;
}

// ---------------------------------------------------------------- synthdata

struct SynthArgs {
  Common common;
  std::size_t classes = 4;
  std::size_t series_len = 32;
  std::size_t size = 64;
  float noise = 0.02f;
  std::size_t field = 16;
  float jitter = 1.0f;
  std::size_t train_regions = 4;
  std::size_t val_regions = 0;
  std::size_t test_regions = 1;
};

void cmd_synthdata(CLI::App& sub, const SynthArgs& a) {
  const fs::path out = a.common.out;
  fs::create_directories(out / "cubes");
  fs::create_directories(out / "labels");
  DatasetManifest manifest;
  const std::size_t total = a.train_regions + a.val_regions + a.test_regions;
  if (total == 0) throw DomainError("synthdata: no regions requested");
  for (std::size_t i = 0; i < total; ++i) {
    SynthOptions o;
    o.seed = derive(a.common.seed, i);
    o.classes = a.classes;
    o.t = a.series_len;
    o.h = o.w = a.size;
    o.noise = a.noise;
    o.field = a.field;
    o.latent_jitter = a.jitter;
    auto res = synth_cube(o);
    const auto id = region_name(i);
    res.cube.region_id = id;
    const auto cube_path = out / "cubes" / (id + ".pimc");
    const auto label_path = out / "labels" / (id + ".pimc");
    write_cube(res.cube, cube_path);
    write_labels(res.labels, label_path);
    ManifestEntry e;
    e.region_id = id;
    e.cube = cube_path;
    e.labels = label_path;
    e.split = i < a.train_regions ? Split::Train : i < a.train_regions + a.val_regions ? Split::Val : Split::Test;
    manifest.regions.push_back(e);
  }
  save_manifest(manifest, out / "manifest.json");
  write_resolved(sub, out);
  spdlog::info("wrote {} regions to {}", total, out.string());
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  Common common;
  std::string manifest;
  std::size_t ps = 32;
  std::size_t pixels = 150;
  std::string mode = "hilbert";
  std::size_t series_len = 0;
  std::size_t plot_size = 64;
  std::size_t exclude_hilbert = 0;
};

void cmd_extract(CLI::App& sub, const ExtractArgs& a) {
  const fs::path out = a.common.out;
  const auto manifest_path = fs::absolute(a.manifest).lexically_normal();
  const auto manifest = load_manifest(manifest_path);
  const auto mode = parse_mode(a.mode);
  fs::create_directories(out / "series");
  fs::create_directories(out / "plots");
  json meta;
  meta["manifest"] = manifest_path.string();
  meta["ps"] = a.ps;
  meta["pixels"] = a.pixels;
  meta["mode"] = mode_name(mode);
  meta["series_len"] = a.series_len;
  meta["plot_size"] = a.plot_size;
  meta["seed"] = a.common.seed;
  meta["regions"] = json::array();
  for (std::size_t r = 0; r < manifest.regions.size(); ++r) {
    const auto& e = manifest.regions[r];
    auto cube = truncate_cube(read_cube(e.cube), a.series_len);
    cube.region_id = e.region_id;
    const auto grid = slice_patches(cube, a.ps);
    const std::uint64_t region_seed = derive(a.common.seed, r);
    std::vector<IndexSeriesSet> sets;
    std::vector<RpImage> plots;
    for (std::size_t i = 0; i < grid.patches.size(); ++i) {
      sets.push_back(extract_patch_series(cube, grid.patches[i], a.ps, mode, a.pixels, region_seed + i,
                                          a.exclude_hilbert));
      const auto& set = sets.back();
      for (std::size_t k = 0; k < set.size(); ++k) {
        auto rp = stack_channels(set.pixel_series(k), set.n, set.pixels[k]);
        plots.push_back(a.plot_size == 0 || rp.n == a.plot_size ? std::move(rp) : resize_rp(rp, a.plot_size));
      }
    }
    const auto series_rel = fs::path("series") / (e.region_id + ".series");
    const auto plots_rel = fs::path("plots") / (e.region_id + ".rp");
    save_series_sets(sets, out / series_rel);
    save_rp_batch(plots, out / plots_rel);
    meta["regions"].push_back({{"region_id", e.region_id},
                               {"split", split_name(e.split)},
                               {"patches", sets.size()},
                               {"series", series_rel.string()},
                               {"plots", plots_rel.string()}});
  }
  std::ofstream(out / "extract.json", std::ios::trunc) << meta.dump(2) << '\n';
  write_resolved(sub, out);
  spdlog::info("extracted {} regions to {}", manifest.regions.size(), out.string());
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  Common common;
  std::string data;
  std::string preset = "desk";
  std::size_t epochs = 40;
  std::size_t batch = 64;
  float lr = 1e-3f;
  float weight_decay = 1e-4f;
  float temp_init = 0.07f;
  bool fixed_temp = false;
  bool cosine = false;
  std::size_t image_size = 0;
  std::size_t plot_size = 64;
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t blocks = 2;
  std::size_t embed_dim = 128;
  std::size_t checkpoint_every = 0;
  std::size_t max_steps = 0;
};

void cmd_train(CLI::App& sub, TrainArgs a) {
  const fs::path out = a.common.out;
  note_workers(a.common.workers);
  const auto ex = load_extract(a.data);
  if (a.image_size == 0) a.image_size = ex.ps;
  if (a.preset != "desk" && a.preset != "full") throw DomainError("train: --preset must be desk or full");
  TrainConfig cfg = a.preset == "full" ? TrainConfig::full(a.image_size, a.plot_size)
                                       : TrainConfig::desk(a.image_size, a.plot_size);
  if (sub.count("--epochs") > 0 || a.preset == "desk") cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.lr = a.lr;
  cfg.weight_decay = a.weight_decay;
  cfg.temp_init = a.temp_init;
  cfg.learn_temperature = !a.fixed_temp;
  cfg.cosine_decay = a.cosine;
  cfg.seed = a.common.seed;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.max_steps = a.max_steps;
  for (auto* e : {&cfg.image_encoder, &cfg.series_encoder}) {
    e->widths = a.widths;
    e->blocks_per_stage = a.blocks;
    e->embed_dim = a.embed_dim;
  }
  cfg.out_dir = out;
  write_resolved(sub, out);

  const auto train_set = pair_dataset(ex, Split::Train, a.image_size, a.plot_size);
  const auto val_set = pair_dataset(ex, Split::Val, a.image_size, a.plot_size);
  spdlog::info("training on {} patches ({} pairs), {} validation patches", train_set.patches.size(),
               train_set.pair_count(), val_set.patches.size());
  const auto model = train(train_set, cfg, val_set.patches.empty() ? nullptr : &val_set);

  json summary;
  summary["steps"] = model.state.step;
  summary["epochs"] = model.state.epoch_loss.size();
  summary["final_loss"] = model.state.epoch_loss.empty() ? 0.0f : model.state.epoch_loss.back();
  summary["tau"] = model.tau();
  summary["best_epoch"] = model.state.best_epoch;
  summary["best_metric"] = model.state.best_metric;
  summary["metric"] = val_set.patches.empty() ? "train_loss" : "val_loss";
  std::ofstream(out / "summary.json", std::ios::trunc) << summary.dump(2) << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  std::string task;
  std::string checkpoint;
  std::string data;
  std::string probe = "frozen";
  std::size_t head_epochs = 100;
  std::size_t finetune_epochs = 20;
  float head_lr = 1e-3f;
  float encoder_lr_scale = 0.1f;
  std::size_t hidden = 0;
  std::size_t batch = 64;
  std::size_t horizon = 10;
  std::size_t context = 32;
  std::size_t stride = 0;
  std::size_t per_patch = 1;
  std::vector<std::int32_t> ignore;
};

SampleSet task_samples(const Extracted& ex, const std::vector<const ManifestEntry*>& regions, const EvalArgs& a,
                       const TrainResult& model) {
  const std::size_t plot_size = model.series.config.input_size;
  SampleSet all;
  all.horizon = a.horizon;
  auto cat = [](std::vector<float>& x, const std::vector<float>& y) { x.insert(x.end(), y.begin(), y.end()); };
  for (const auto* e : regions) {
    auto r = load_region(ex, *e);
    SampleSet part;
    if (a.task == "pixel-cls") {
      if (!r.labels) throw ConfigError("region " + e->region_id + " has no label raster");
      part = pixel_samples(r.sets, *r.labels, plot_size, a.ignore);
    } else if (a.task == "forecast") {
      part = forecast_samples(r.sets, plot_size, ForecastWindow{a.context, a.horizon, a.stride});
    } else {
      if (!r.labels) throw ConfigError("region " + e->region_id + " has no label raster");
      PairDataset ds;
      ds.image_size = model.image.config.input_size;
      ds.plot_size = plot_size;
      append_patches(ds, r.cube, r.sets, &*r.labels);
      part = landcover_samples(ds, a.per_patch);
    }
    all.size = part.size;
    all.count += part.count;
    all.skipped += part.skipped;
    cat(all.inputs, part.inputs);
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    cat(all.targets, part.targets);
    cat(all.future, part.future);
    cat(all.anchors, part.anchors);
    cat(all.scales, part.scales);
  }
  return all;
}

void cmd_eval(CLI::App& sub, const EvalArgs& a) {
  const fs::path out = a.common.out;
  note_workers(a.common.workers);
  auto model = load_checkpoint(a.checkpoint);
  const auto ex = load_extract(a.data);
  write_resolved(sub, out);

  HeadConfig head;
  head.mode = parse_attach(a.probe);
  head.epochs = a.head_epochs;
  head.finetune_epochs = a.finetune_epochs;
  head.lr = a.head_lr;
  head.encoder_lr_scale = a.encoder_lr_scale;
  head.hidden = a.hidden;
  head.batch_size = a.batch;
  head.seed = derive(a.common.seed, 0);

  const auto train_set = task_samples(ex, ex.manifest.in_split(Split::Train), a, model);
  const auto test_set = task_samples(ex, eval_split(ex.manifest), a, model);
  ProbeOutcome result;
  if (a.task == "pixel-cls") {
    result = classify_pixels(model.series, train_set, test_set, head);
  } else if (a.task == "forecast") {
    result = forecast_index(model.series, train_set, test_set, head);
  } else {
    result = classify_landcover(model.image, train_set, test_set, head);
  }
  result.report.run = out.filename().string();
  write_report_json(result.report, out / "metrics.json");
  write_report_csv(result.report, out / "metrics.csv");
  if (result.report.classification) write_confusion_csv(*result.report.classification, out / "confusion.csv");
  if (result.report.classification) {
    spdlog::info("{} {}: acc {:.4f} balanced {:.4f} macro-F1 {:.4f}", a.task, a.probe,
                 result.report.classification->accuracy, result.report.classification->balanced_accuracy,
                 result.report.classification->macro_f1);
  } else {
    spdlog::info("{} {}: MAE {:.5f}", a.task, a.probe, result.report.regression.back().mae);
  }
}

// ---------------------------------------------------------------- embed

struct EmbedArgs {
  Common common;
  std::string checkpoint;
  std::string data;
  std::string encoder = "series";
  std::string split = "all";
  std::size_t timestamp = 0;  // image encoder: which timestamp of each patch
};

void cmd_embed(CLI::App& sub, const EmbedArgs& a) {
  const fs::path out = a.common.out;
  note_workers(a.common.workers);
  auto model = load_checkpoint(a.checkpoint);
  const auto ex = load_extract(a.data);
  if (a.encoder != "series" && a.encoder != "image") throw DomainError("embed: --encoder must be series or image");
  write_resolved(sub, out);
  fs::create_directories(out);
  json index = json::array();
  for (const auto& e : ex.manifest.regions) {
    if (a.split != "all" && parse_split(a.split) != e.split) continue;
    auto r = load_region(ex, e);
    std::vector<float> inputs;
    json rows = json::array();
    std::size_t count = 0;
    auto& enc = a.encoder == "series" ? model.series : model.image;
    const std::size_t s = enc.config.input_size;
    if (a.encoder == "series") {
      for (const auto& set : r.sets) {
        for (std::size_t i = 0; i < set.size(); ++i) {
          auto rp = stack_channels(set.pixel_series(i), set.n, set.pixels[i]);
          if (rp.n != s) rp = resize_rp(rp, s);
          inputs.insert(inputs.end(), rp.data.begin(), rp.data.end());
          rows.push_back({set.pixels[i].x, set.pixels[i].y});
          ++count;
        }
      }
    } else {
      PairDataset ds;
      ds.image_size = s;
      ds.plot_size = model.series.config.input_size;
      append_patches(ds, r.cube, r.sets);
      const std::size_t plane = 3 * s * s;
      for (const auto& p : ds.patches) {
        const std::size_t ts = std::min(a.timestamp, p.timestamps - 1);
        const auto first = p.rgb.begin() + static_cast<std::ptrdiff_t>(ts * plane);
        inputs.insert(inputs.end(), first, first + static_cast<std::ptrdiff_t>(plane));
        rows.push_back({p.patch.col, p.patch.row});
        ++count;
      }
    }
    if (count == 0) continue;
    const auto emb = embed_all(enc, inputs, count);
    const std::size_t shape[2] = {count, enc.config.embed_dim};
    const auto file = e.region_id + "." + a.encoder + ".emb";
    write_container(tensor_container(shape, emb), out / file);
    index.push_back({{"region_id", e.region_id}, {"file", file}, {"rows", count}, {"xy", rows}});
  }
  std::ofstream(out / "embeddings.json", std::ios::trunc)
      << json{{"encoder", a.encoder}, {"embed_dim", (a.encoder == "series" ? model.series : model.image).config.embed_dim},
              {"regions", index}}
             .dump(1)
      << '\n';
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  Common common;
  std::vector<std::string> runs;
  std::vector<std::string> losses;
};

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

void ranking_svg(const std::vector<RankRow>& rows, const fs::path& path) {
  const double bar_h = 18, gap = 6, left = 260, width = 420;
  const double height = 40 + static_cast<double>(rows.size()) * (bar_h + gap);
  double max_mae = 0.0;
  for (const auto& r : rows)
    if (r.metric == "mae") max_mae = std::max(max_mae, r.value);
  std::ofstream f(path, std::ios::trunc);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + width + 80 << "\" height=\"" << height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  double y = 24;
  for (const auto& r : rows) {
    const double frac = r.metric == "mae" ? (max_mae > 0 ? r.value / max_mae : 0.0) : r.value;
    const char* colour = r.metric == "mae" ? "#c0504d" : "#4f81bd";
    f << "<text x=\"4\" y=\"" << y + 13 << "\">" << svg_escape(r.task + " #" + std::to_string(r.rank) + " " + r.run + " (" + r.mode + ")")
      << "</text>\n";
    f << "<rect x=\"" << left << "\" y=\"" << y << "\" width=\"" << width * std::clamp(frac, 0.0, 1.0)
      << "\" height=\"" << bar_h << "\" fill=\"" << colour << "\"/>\n";
    char label[64];
    std::snprintf(label, sizeof label, "%s %.4f", r.metric == "mae" ? "MAE" : "bal. acc", r.value);
    f << "<text x=\"" << left + width + 4 << "\" y=\"" << y + 13 << "\">" << label << "</text>\n";
    y += bar_h + gap;
  }
  f << "</svg>\n";
}

std::vector<std::pair<double, double>> read_loss_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("loss log not found: " + path.string());
  std::vector<std::pair<double, double>> pts;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    double step = 0, epoch = 0, loss = 0, tau = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &step, &epoch, &loss, &tau) >= 3) pts.emplace_back(step, loss);
  }
  return pts;
}

void loss_svg(const std::vector<std::string>& files, const fs::path& path) {
  const double w = 640, h = 360, pad = 40;
  std::vector<std::vector<std::pair<double, double>>> curves;
  double max_step = 1, max_loss = 1e-9;
  for (const auto& file : files) {
    curves.push_back(read_loss_csv(file));
    for (const auto& [s, l] : curves.back()) {
      max_step = std::max(max_step, s);
      max_loss = std::max(max_loss, l);
    }
  }
  static const char* colours[] = {"#4f81bd", "#c0504d", "#9bbb59", "#8064a2", "#f79646"};
  std::ofstream f(path, std::ios::trunc);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  f << "<line x1=\"" << pad << "\" y1=\"" << h - pad << "\" x2=\"" << w - pad << "\" y2=\"" << h - pad
    << "\" stroke=\"black\"/>\n<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << h - pad
    << "\" stroke=\"black\"/>\n";
  f << "<text x=\"" << w / 2 << "\" y=\"" << h - 8 << "\">step</text>\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", max_loss);
  f << "<text x=\"4\" y=\"" << pad - 6 << "\">loss (max " << buf << ")</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    f << "<polyline fill=\"none\" stroke=\"" << colours[c % 5] << "\" points=\"";
    for (const auto& [s, l] : curves[c]) {
      f << pad + (w - 2 * pad) * s / max_step << ',' << (h - pad) - (h - 2 * pad) * l / max_loss << ' ';
    }
    f << "\"/>\n<text x=\"" << w - pad - 200 << "\" y=\"" << pad + 14.0 * static_cast<double>(c) << "\" fill=\""
      << colours[c % 5] << "\">" << svg_escape(files[c]) << "</text>\n";
  }
  f << "</svg>\n";
}

void cmd_report(CLI::App& sub, const ReportArgs& a) {
  const fs::path out = a.common.out;
  if (a.runs.empty() && a.losses.empty()) throw DomainError("report: give --runs and/or --loss");
  write_resolved(sub, out);
  std::vector<MetricsReport> reports;
  for (const auto& r : a.runs) {
    fs::path p = r;
    if (fs::is_directory(p)) p /= "metrics.json";
    auto rep = read_report_json(p);
    if (rep.run.empty()) rep.run = p.parent_path().filename().string();
    reports.push_back(std::move(rep));
  }
  if (!reports.empty()) {
    const auto rows = compare_runs(reports);
    write_ranking_csv(rows, out / "ranking.csv");
    ranking_svg(rows, out / "ranking.svg");
  }
  if (!a.losses.empty()) loss_svg(a.losses, out / "loss.svg");
}

int classify_error(const std::exception& e) {
  if (dynamic_cast<const NumericalError*>(&e)) return kExitNumerical;
  if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const DimensionError*>(&e)) return kExitUsage;
  return kExitData;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Recurrence-plot contrastive pretraining for satellite image time series"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synthdata", "write synthetic cubes, label rasters and a manifest");
  add_common(*s_synth, synth.common);
  s_synth->add_option("--classes", synth.classes, "latent classes");
  s_synth->add_option("--series-len", synth.series_len, "timestamps per cube");
  s_synth->add_option("--size", synth.size, "cube height and width");
  s_synth->add_option("--noise", synth.noise, "reflectance noise std-dev");
  s_synth->add_option("--field", synth.field, "field side in pixels");
  s_synth->add_option("--jitter", synth.jitter, "scale of the per-field latents");
  s_synth->add_option("--train-regions", synth.train_regions);
  s_synth->add_option("--val-regions", synth.val_regions);
  s_synth->add_option("--test-regions", synth.test_regions);

  ExtractArgs extract;
  auto* s_extract = app.add_subcommand("extract", "sample pixels, build index series and recurrence plots");
  add_common(*s_extract, extract.common);
  s_extract->add_option("--manifest", extract.manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  s_extract->add_option("--ps", extract.ps, "patch side");
  s_extract->add_option("--pixels", extract.pixels, "pixels sampled per patch");
  s_extract->add_option("--mode", extract.mode, "pixel sampling")->check(CLI::IsMember({"hilbert", "random"}));
  s_extract->add_option("--series-len", extract.series_len, "keep the first n timestamps (0 = all)");
  s_extract->add_option("--plot-size", extract.plot_size, "side of the stored plots (0 = series length)");
  s_extract->add_option("--exclude-hilbert", extract.exclude_hilbert, "random mode: avoid this many Hilbert cells");

  TrainArgs trainer;
  auto* s_train = app.add_subcommand("train", "contrastive pretraining of the image and series encoders");
  add_common(*s_train, trainer.common);
  s_train->add_option("--data", trainer.data, "extract output directory")->required();
  s_train->add_option("--preset", trainer.preset, "desk (40 epochs) or full (400 epochs)")
      ->check(CLI::IsMember({"desk", "full"}));
  s_train->add_option("--epochs", trainer.epochs);
  s_train->add_option("--batch", trainer.batch)->check(CLI::PositiveNumber);
  s_train->add_option("--lr", trainer.lr);
  s_train->add_option("--weight-decay", trainer.weight_decay);
  s_train->add_option("--temp-init", trainer.temp_init, "initial temperature");
  s_train->add_flag("--fixed-temp", trainer.fixed_temp, "keep the temperature at its initial value");
  s_train->add_flag("--cosine", trainer.cosine, "cosine learning-rate decay");
  s_train->add_option("--image-size", trainer.image_size, "image encoder input side (0 = patch side)");
  s_train->add_option("--plot-size", trainer.plot_size, "series encoder input side");
  s_train->add_option("--widths", trainer.widths, "stage widths")->delimiter(',');
  s_train->add_option("--blocks", trainer.blocks, "residual blocks per stage");
  s_train->add_option("--embed-dim", trainer.embed_dim);
  s_train->add_option("--checkpoint-every", trainer.checkpoint_every, "epochs between checkpoints (0 = best and final only)");
  s_train->add_option("--max-steps", trainer.max_steps, "stop after this many steps (0 = no limit)");

  EvalArgs evaluator;
  auto* s_eval = app.add_subcommand("eval", "probe a trained encoder on a downstream task");
  add_common(*s_eval, evaluator.common);
  s_eval->add_option("--task", evaluator.task)->required()->check(CLI::IsMember({"pixel-cls", "forecast", "landcover"}));
  s_eval->add_option("--checkpoint", evaluator.checkpoint, "checkpoint directory")->required();
  s_eval->add_option("--data", evaluator.data, "extract output directory")->required();
  s_eval->add_option("--probe", evaluator.probe)->check(CLI::IsMember({"frozen", "finetune"}));
  s_eval->add_option("--head-epochs", evaluator.head_epochs);
  s_eval->add_option("--finetune-epochs", evaluator.finetune_epochs);
  s_eval->add_option("--head-lr", evaluator.head_lr);
  s_eval->add_option("--encoder-lr-scale", evaluator.encoder_lr_scale);
  s_eval->add_option("--hidden", evaluator.hidden, "hidden units of the head (0 = linear)");
  s_eval->add_option("--batch", evaluator.batch)->check(CLI::PositiveNumber);
  s_eval->add_option("--horizon", evaluator.horizon);
  s_eval->add_option("--context", evaluator.context);
  s_eval->add_option("--stride", evaluator.stride, "forecast window stride (0 = one window per series)");
  s_eval->add_option("--per-patch", evaluator.per_patch, "landcover: timestamps per patch");
  s_eval->add_option("--ignore", evaluator.ignore, "labels excluded from pixel classification")->delimiter(',');

  EmbedArgs embedder;
  auto* s_embed = app.add_subcommand("embed", "write embeddings of every sampled pixel or patch");
  add_common(*s_embed, embedder.common);
  s_embed->add_option("--checkpoint", embedder.checkpoint)->required();
  s_embed->add_option("--data", embedder.data)->required();
  s_embed->add_option("--encoder", embedder.encoder)->check(CLI::IsMember({"series", "image"}));
  s_embed->add_option("--split", embedder.split)->check(CLI::IsMember({"all", "train", "val", "test"}));
  s_embed->add_option("--timestamp", embedder.timestamp, "image encoder: timestamp index");

  ReportArgs reporter;
  auto* s_report = app.add_subcommand("report", "rank metric reports and plot loss curves");
  add_common(*s_report, reporter.common);
  s_report->add_option("--runs", reporter.runs, "metrics.json files or eval output directories");
  s_report->add_option("--loss", reporter.losses, "loss.csv files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    spdlog::set_level(spdlog::level::from_str(log_level));
    CLI::App* sub = app.get_subcommands().front();
    const std::map<CLI::App*, Common*> commons = {{s_synth, &synth.common},   {s_extract, &extract.common},
                                                  {s_train, &trainer.common}, {s_eval, &evaluator.common},
                                                  {s_embed, &embedder.common}, {s_report, &reporter.common}};
    apply_config(*sub, commons.at(sub)->config);
    if (sub == s_synth) cmd_synthdata(*sub, synth);
    else if (sub == s_extract) cmd_extract(*sub, extract);
    else if (sub == s_train) cmd_train(*sub, trainer);
    else if (sub == s_eval) cmd_eval(*sub, evaluator);
    else if (sub == s_embed) cmd_embed(*sub, embedder);
    else cmd_report(*sub, reporter);
  } catch (const CLI::Error& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return classify_error(e);
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace pimc::cli
