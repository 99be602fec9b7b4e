#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "pimc/adam.hpp"
#include "pimc/encoder.hpp"
#include "pimc/pairs.hpp"
#include "pimc/tensor.hpp"

namespace pimc {

inline constexpr float kMinTemperature = 1e-3f;
inline constexpr float kMaxTemperature = 100.0f;

struct SimilarityDiagnostics {
  std::size_t guarded_image_rows = 0;
  std::size_t guarded_series_rows = 0;
};

/// S = normalize_rows(I) * normalize_rows(T)^T / tau.
Tensor similarity_matrix(const Tensor& image_features, const Tensor& series_features, float tau,
                         SimilarityDiagnostics* diag = nullptr);

/// Same with a learnable log-inverse temperature: S = cos * exp(log_scale).
Tensor similarity_matrix(const Tensor& image_features, const Tensor& series_features, const Tensor& log_scale,
                         SimilarityDiagnostics* diag = nullptr);

/// 0.5 * (CE over rows of S + CE over rows of S^T), targets on the diagonal.
Tensor pimc_loss(const Tensor& similarity);

struct TrainConfig {
  std::size_t epochs = 40;
  float lr = 1e-3f;
  bool cosine_decay = false;  // anneal lr to 0 over the run instead of keeping it constant
  float weight_decay = 1e-4f;
  std::size_t batch_size = 64;
  float temp_init = 0.07f;
  bool learn_temperature = true;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 keeps only best and final
  std::size_t max_steps = 0;         // 0 = no limit
  EncoderConfig image_encoder;
  EncoderConfig series_encoder;
  std::optional<std::filesystem::path> out_dir;  // checkpoints + logs when set

  /// Desk-scale preset (40 epochs) and the 400-epoch preset.
  static TrainConfig desk(std::size_t image_size, std::size_t plot_size);
  static TrainConfig full(std::size_t image_size, std::size_t plot_size);
};

struct StepRecord {
  std::int64_t step = 0;
  std::size_t epoch = 0;
  float loss = 0.0f;
  float tau = 0.0f;
  double wall_ms = 0.0;
};

struct TrainState {
  AdamState image_opt;
  AdamState series_opt;
  AdamState temp_opt;
  std::int64_t step = 0;
  std::size_t epoch = 0;
  std::vector<StepRecord> history;
  std::vector<float> epoch_loss;  // mean train loss per epoch
  std::vector<float> val_loss;    // per epoch, when a validation set is given
  float best_metric = 0.0f;
  std::size_t best_epoch = 0;
  std::optional<std::filesystem::path> last_checkpoint;
};

struct TrainResult {
  EncoderParams image;
  EncoderParams series;
  Tensor log_scale;  // log(1 / tau)
  TrainState state;

  float tau() const;
};

/// Pair-wise contrastive training of the image and series encoders.
/// Throws NumericalError naming the last good checkpoint on a non-finite loss.
TrainResult train(const PairDataset& train_set, const TrainConfig& config, const PairDataset* val_set = nullptr);

/// Mean loss of fixed pairings (epoch-0 plan under `seed`) in eval mode.
float evaluate_loss(TrainResult& model, const PairDataset& ds, std::size_t batch_size, std::uint64_t seed);

/// Top-1 retrieval accuracy over a single batch of pairs, both directions.
struct RetrievalScore {
  double plot_to_image = 0.0;
  double image_to_plot = 0.0;
  std::size_t pairs = 0;
};
RetrievalScore cross_modal_retrieval(EncoderParams& image, EncoderParams& series, const PairBatch& batch);

/// Checkpoint directory layout: image.ckpt, series.ckpt (+ .json) and state.json.
void save_checkpoint(const TrainResult& model, const std::filesystem::path& dir);
TrainResult load_checkpoint(const std::filesystem::path& dir);

/// step,epoch,loss,tau rows; wall-clock timing goes to a separate file so
/// this one is byte-identical across identical runs.
void write_loss_csv(const std::vector<StepRecord>& history, const std::filesystem::path& path);
void write_timing_csv(const std::vector<StepRecord>& history, const std::filesystem::path& path);

}  // namespace pimc
