#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pimc/tensor.hpp"

namespace pimc {

/// Compact ResNet-style encoder: 3x3 stem, residual stages of basic blocks
/// (stride-2 downsampling entering every stage after the first), global
/// average pooling and a linear projection to `embed_dim`.
struct EncoderConfig {
  std::vector<std::size_t> widths{16, 32, 64, 128};
  std::size_t blocks_per_stage = 2;
  std::size_t in_channels = 3;
  std::size_t embed_dim = 128;
  std::size_t input_size = 64;
  bool zero_init_residual = false;  // final BN scale of every block starts at 0

  void validate() const;
  bool operator==(const EncoderConfig&) const = default;

  /// ResNet-18 widths; provided for completeness, not exercised at desk scale.
  static EncoderConfig resnet18_width(std::size_t input_size, std::size_t embed_dim = 512);
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

struct EncoderParams {
  EncoderConfig config;
  std::vector<NamedTensor> params;   // trainable, fixed order
  std::vector<NamedTensor> buffers;  // batch-norm running statistics
  std::uint64_t seed = 0;
  std::int64_t step = 0;

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  Tensor& buffer(const std::string& name);

  std::vector<Tensor> trainable() const;
  std::size_t parameter_count() const;
  /// FNV-1a over every parameter and buffer value.
  std::uint64_t checksum() const;
  /// Deep copy with independent storage.
  EncoderParams clone() const;
};

/// He (fan-in) normal initialization for convolutions, uniform
/// +-1/sqrt(fan_in) for the projection; deterministic under `seed`.
EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed);

/// batch[b x in_channels x s x s] -> [b x embed_dim]. Training mode uses
/// batch statistics and updates the running buffers.
Tensor encode(EncoderParams& params, const Tensor& batch, bool training);

/// Eval-mode encoding in chunks without recording gradients.
std::vector<float> embed_all(EncoderParams& params, const std::vector<float>& inputs, std::size_t count,
                             std::size_t chunk = 64);

/// Writes `path` (concatenated containers, one per tensor) and `path`.json
/// (tensor index with byte offsets, config, seed, step).
void save_params(const EncoderParams& params, const std::filesystem::path& path);
EncoderParams load_params(const std::filesystem::path& path);

}  // namespace pimc
