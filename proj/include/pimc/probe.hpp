#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pimc/encoder.hpp"
#include "pimc/tensor.hpp"

namespace pimc {

enum class HeadKind { Classifier, Forecaster };
enum class AttachMode { Frozen, Finetune };

const char* attach_name(AttachMode mode);
AttachMode parse_attach(const std::string& name);

struct HeadConfig {
  HeadKind kind = HeadKind::Classifier;
  std::size_t outputs = 2;  // classes, or 3 x horizon for a forecaster
  std::size_t hidden = 0;   // 0 = single linear layer
  AttachMode mode = AttachMode::Frozen;
  std::size_t epochs = 100;
  float lr = 1e-3f;
  float weight_decay = 0.0f;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // Fine-tuning runs after the frozen stage: encoder and head together.
  std::size_t finetune_epochs = 20;
  float encoder_lr_scale = 0.1f;

  void validate() const;
};

/// Inputs are standardized with statistics frozen at fit time, then mapped
/// through one linear layer or linear-ReLU-linear.
struct ProbeHead {
  HeadConfig config;
  std::size_t in_dim = 0;
  Tensor standardize_weight;  // diag(1 / std), d x d
  Tensor standardize_bias;    // -mean / std
  std::vector<NamedTensor> params;

  Tensor forward(const Tensor& features) const;
  std::vector<Tensor> trainable() const;
};

ProbeHead init_head(const HeadConfig& config, std::size_t in_dim, std::uint64_t seed);

/// Sets the standardization from n x d training features.
void fit_standardization(ProbeHead& head, std::span<const float> features, std::size_t n);

/// Training targets: class slots for a classifier, n x outputs values for a forecaster.
struct ProbeTargets {
  std::vector<std::size_t> classes;
  std::vector<float> values;
};

/// Trains the head alone on fixed features (n x d).
void train_head(ProbeHead& head, std::span<const float> features, std::size_t n, const ProbeTargets& targets);

/// Trains encoder and head together on raw inputs (n x c x s x s). The
/// encoder runs with frozen batch-norm statistics.
void finetune(ProbeHead& head, EncoderParams& encoder, std::span<const float> inputs, std::size_t n,
              const ProbeTargets& targets);

/// Head outputs for n x d features.
std::vector<float> head_outputs(const ProbeHead& head, std::span<const float> features, std::size_t n);

/// Row-wise argmax of n x k outputs.
std::vector<std::size_t> argmax_rows(std::span<const float> outputs, std::size_t n, std::size_t k);

}  // namespace pimc
