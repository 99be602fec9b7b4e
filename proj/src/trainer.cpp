#include "pimc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <spdlog/spdlog.h>

#include "pimc/errors.hpp"
#include "pimc/ops.hpp"

namespace pimc {

Tensor similarity_matrix(const Tensor& image_features, const Tensor& series_features, float tau,
                         SimilarityDiagnostics* diag) {
  if (!(tau > 0.0f)) throw DomainError("similarity_matrix: tau must be positive");
  auto cos = similarity_matrix(image_features, series_features, Tensor::scalar(0.0f), diag);
  return ops::mul_scalar(cos, 1.0f / tau);
}

Tensor similarity_matrix(const Tensor& image_features, const Tensor& series_features, const Tensor& log_scale,
                         SimilarityDiagnostics* diag) {
  if (image_features.rank() != 2 || image_features.shape() != series_features.shape()) {
    throw DimensionError("similarity_matrix: feature shapes differ: " + shape_str(image_features.shape()) + " vs " +
                         shape_str(series_features.shape()));
  }
  SimilarityDiagnostics d;
  auto in = ops::l2_normalize_rows(image_features, 1e-8f, &d.guarded_image_rows);
  auto tn = ops::l2_normalize_rows(series_features, 1e-8f, &d.guarded_series_rows);
  if (d.guarded_image_rows + d.guarded_series_rows > 0) {
    spdlog::warn("similarity_matrix: {} image / {} series feature rows with near-zero norm", d.guarded_image_rows,
                 d.guarded_series_rows);
  }
  if (diag != nullptr) *diag = d;
  auto cos = ops::matmul(in, ops::transpose(tn));
  if (!log_scale.requires_grad() && log_scale.item() == 0.0f) return cos;
  return ops::scale_by(cos, ops::exp(log_scale));
}

Tensor pimc_loss(const Tensor& similarity) {
  if (similarity.rank() != 2 || similarity.dim(0) != similarity.dim(1)) {
    throw DimensionError("pimc_loss: similarity must be square, got " + shape_str(similarity.shape()));
  }
  std::vector<std::size_t> diag(similarity.dim(0));
  for (std::size_t i = 0; i < diag.size(); ++i) diag[i] = i;
  auto image_loss = ops::softmax_cross_entropy_rows(similarity, diag);
  auto series_loss = ops::softmax_cross_entropy_rows(ops::transpose(similarity), diag);
  return ops::mul_scalar(ops::add(image_loss, series_loss), 0.5f);
}

TrainConfig TrainConfig::desk(std::size_t image_size, std::size_t plot_size) {
  TrainConfig c;
  c.epochs = 40;
  c.image_encoder.input_size = image_size;
  c.series_encoder.input_size = plot_size;
  return c;
}

TrainConfig TrainConfig::full(std::size_t image_size, std::size_t plot_size) {
  TrainConfig c = desk(image_size, plot_size);
  c.epochs = 400;
  return c;
}

float TrainResult::tau() const { return std::exp(-log_scale.item()); }

namespace {

void clamp_temperature(Tensor& log_scale) {
  const float lo = -std::log(kMaxTemperature), hi = -std::log(kMinTemperature);
  auto v = log_scale.mutable_data();
  v[0] = std::clamp(v[0], lo, hi);
}

void zero_grads(EncoderParams& p) {
  for (auto& t : p.params) t.value.zero_grad();
}

}  // namespace

TrainResult train(const PairDataset& train_set, const TrainConfig& config, const PairDataset* val_set) {
  if (train_set.patches.empty()) throw DomainError("train: empty training split");
  if (config.image_encoder.input_size != train_set.image_size ||
      config.series_encoder.input_size != train_set.plot_size) {
    throw DimensionError("train: encoder input sizes do not match the dataset (" +
                         std::to_string(train_set.image_size) + ", " + std::to_string(train_set.plot_size) + ")");
  }
  if (!(config.temp_init >= kMinTemperature && config.temp_init <= kMaxTemperature)) {
    throw DomainError("train: temperature init outside [1e-3, 100]");
  }
  std::mt19937_64 root(config.seed);
  const std::uint64_t image_seed = root(), series_seed = root(), batch_seed = root();

  TrainResult model;
  model.image = init_encoder(config.image_encoder, image_seed);
  model.series = init_encoder(config.series_encoder, series_seed);
  model.log_scale = Tensor::scalar(-std::log(config.temp_init), config.learn_temperature);
  auto& st = model.state;
  st.image_opt = make_adam(model.image.trainable(), config.lr, config.weight_decay);
  st.series_opt = make_adam(model.series.trainable(), config.lr, config.weight_decay);
  st.temp_opt = make_adam({model.log_scale}, config.lr, 0.0f);
  st.best_metric = std::numeric_limits<float>::infinity();

  auto checkpoint = [&](const std::string& name) {
    if (!config.out_dir) return;
    const auto dir = *config.out_dir / "checkpoints" / name;
    save_checkpoint(model, dir);
    st.last_checkpoint = dir;
  };
  auto last_good = [&]() { return st.last_checkpoint ? st.last_checkpoint->string() : std::string("none"); };

  std::size_t total_steps = config.epochs * plan_pair_batches(train_set, config.batch_size, batch_seed, 0).size();
  if (config.max_steps > 0) total_steps = std::min(total_steps, config.max_steps);
  auto set_lr = [&]() {
    if (!config.cosine_decay || total_steps == 0) return;
    const double progress = static_cast<double>(st.step) / static_cast<double>(total_steps);
    const float lr = static_cast<float>(0.5 * config.lr * (1.0 + std::cos(std::numbers::pi * progress)));
    st.image_opt.lr = st.series_opt.lr = st.temp_opt.lr = lr;
  };

  const auto t0 = std::chrono::steady_clock::now();
  bool stop = false;
  for (std::size_t epoch = 0; epoch < config.epochs && !stop; ++epoch) {
    st.epoch = epoch;
    double epoch_sum = 0.0;
    std::size_t epoch_steps = 0;
    for (const auto& picks : plan_pair_batches(train_set, config.batch_size, batch_seed, epoch)) {
      if (picks.size() < 2) {
        spdlog::warn("epoch {}: skipping a batch with a single pair", epoch);
        continue;
      }
      const auto batch = materialize(train_set, picks);
      autograd::clear_tape();
      auto feats_i = encode(model.image, batch.images, true);
      auto feats_t = encode(model.series, batch.plots, true);
      auto loss = pimc_loss(similarity_matrix(feats_i, feats_t, model.log_scale));
      const float lv = loss.item();
      if (!std::isfinite(lv)) {
        autograd::clear_tape();
        throw NumericalError("train: non-finite loss at step " + std::to_string(st.step) +
                             "; last good checkpoint: " + last_good());
      }
      zero_grads(model.image);
      zero_grads(model.series);
      model.log_scale.zero_grad();
      autograd::backward(loss);
      auto image_params = model.image.trainable();
      auto series_params = model.series.trainable();
      set_lr();
      try {
        adam_step(image_params, st.image_opt);
        adam_step(series_params, st.series_opt);
        if (config.learn_temperature) {
          std::vector<Tensor> temp{model.log_scale};
          adam_step(temp, st.temp_opt);
          clamp_temperature(model.log_scale);
        }
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + "; last good checkpoint: " + last_good());
      }
      ++st.step;
      model.image.step = model.series.step = st.step;
      const double ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      st.history.push_back({st.step, epoch, lv, model.tau(), ms});
      epoch_sum += lv;
      ++epoch_steps;
      if (config.max_steps > 0 && static_cast<std::size_t>(st.step) >= config.max_steps) {
        stop = true;
        break;
      }
    }
    const float mean_loss = epoch_steps ? static_cast<float>(epoch_sum / static_cast<double>(epoch_steps)) : 0.0f;
    st.epoch_loss.push_back(mean_loss);
    float metric = mean_loss;
    if (val_set != nullptr && !val_set->patches.empty()) {
      metric = evaluate_loss(model, *val_set, config.batch_size, batch_seed);
      st.val_loss.push_back(metric);
    }
    spdlog::info("epoch {} step {} loss {:.4f} tau {:.4f}{}", epoch, st.step, mean_loss, model.tau(),
                 val_set ? fmt::format(" val {:.4f}", metric) : std::string());
    if (metric < st.best_metric) {
      st.best_metric = metric;
      st.best_epoch = epoch;
      checkpoint("best");
    }
    if (config.checkpoint_every > 0 && (epoch + 1) % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04zu", epoch + 1);
      checkpoint(name);
    }
  }
  checkpoint("final");
  if (config.out_dir) {
    write_loss_csv(st.history, *config.out_dir / "loss.csv");
    write_timing_csv(st.history, *config.out_dir / "timing.csv");
  }
  return model;
}

float evaluate_loss(TrainResult& model, const PairDataset& ds, std::size_t batch_size, std::uint64_t seed) {
  autograd::NoGradGuard guard;
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& picks : plan_pair_batches(ds, batch_size, seed, 0)) {
    if (picks.size() < 2) continue;
    const auto batch = materialize(ds, picks);
    auto fi = encode(model.image, batch.images, false);
    auto ft = encode(model.series, batch.plots, false);
    const float lv = pimc_loss(similarity_matrix(fi, ft, model.log_scale)).item();
    total += static_cast<double>(lv) * static_cast<double>(picks.size());
    count += picks.size();
  }
  return count ? static_cast<float>(total / static_cast<double>(count)) : 0.0f;
}

RetrievalScore cross_modal_retrieval(EncoderParams& image, EncoderParams& series, const PairBatch& batch) {
  autograd::NoGradGuard guard;
  const std::size_t b = batch.images.dim(0);
  const auto fi = embed_all(image, std::vector<float>(batch.images.data().begin(), batch.images.data().end()), b);
  const auto ft = embed_all(series, std::vector<float>(batch.plots.data().begin(), batch.plots.data().end()), b);
  const std::size_t d = image.config.embed_dim;
  auto s = similarity_matrix(Tensor::from({b, d}, fi), Tensor::from({b, d}, ft), 1.0f);
  const auto v = s.data();
  RetrievalScore score;
  score.pairs = b;
  std::size_t rows_ok = 0, cols_ok = 0;
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best_r = 0, best_c = 0;
    for (std::size_t j = 1; j < b; ++j) {
      if (v[i * b + j] > v[i * b + best_r]) best_r = j;
      if (v[j * b + i] > v[best_c * b + i]) best_c = j;
    }
    rows_ok += best_r == i;  // image i retrieves plot i
    cols_ok += best_c == i;  // plot i retrieves image i
  }
  score.image_to_plot = static_cast<double>(rows_ok) / static_cast<double>(b);
  score.plot_to_image = static_cast<double>(cols_ok) / static_cast<double>(b);
  return score;
}

void save_checkpoint(const TrainResult& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_params(model.image, dir / "image.ckpt");
  save_params(model.series, dir / "series.ckpt");
  nlohmann::json st;
  st["step"] = model.state.step;
  st["epoch"] = model.state.epoch;
  st["log_scale"] = model.log_scale.item();
  st["tau"] = model.tau();
  std::ofstream out(dir / "state.json", std::ios::trunc);
  out << st.dump(1) << '\n';
}

TrainResult load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("checkpoint directory not found: " + dir.string());
  TrainResult model;
  model.image = load_params(dir / "image.ckpt");
  model.series = load_params(dir / "series.ckpt");
  std::ifstream in(dir / "state.json");
  if (!in) throw ConfigError("checkpoint " + dir.string() + " has no state.json");
  nlohmann::json st;
  in >> st;
  model.state.step = st.at("step").get<std::int64_t>();
  model.state.epoch = st.at("epoch").get<std::size_t>();
  model.log_scale = Tensor::scalar(st.at("log_scale").get<float>());
  return model;
}

void write_loss_csv(const std::vector<StepRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,epoch,loss,tau\n";
  char line[128];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%lld,%zu,%.9g,%.9g\n", static_cast<long long>(r.step), r.epoch,
                  static_cast<double>(r.loss), static_cast<double>(r.tau));
    out << line;
  }
}

void write_timing_csv(const std::vector<StepRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "step,wall_ms\n";
  for (const auto& r : history) out << r.step << ',' << static_cast<long long>(r.wall_ms) << '\n';
}

}  // namespace pimc
