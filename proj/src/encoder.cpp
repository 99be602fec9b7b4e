#include "pimc/encoder.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "pimc/errors.hpp"
#include "pimc/ops.hpp"

namespace pimc {

void EncoderConfig::validate() const {
  if (widths.empty()) throw DomainError("encoder: at least one stage width is required");
  for (auto w : widths) {
    if (w == 0) throw DomainError("encoder: stage widths must be positive");
  }
  if (blocks_per_stage == 0) throw DomainError("encoder: blocks_per_stage must be positive");
  if (in_channels == 0) throw DomainError("encoder: in_channels must be positive");
  if (embed_dim < 8) throw DomainError("encoder: embed_dim must be >= 8");
  if (input_size < (std::size_t{1} << (widths.size() - 1))) throw DomainError("encoder: input too small for the stage count");
}

EncoderConfig EncoderConfig::resnet18_width(std::size_t input_size, std::size_t embed_dim) {
  EncoderConfig c;
  c.widths = {64, 128, 256, 512};
  c.blocks_per_stage = 2;
  c.input_size = input_size;
  c.embed_dim = embed_dim;
  return c;
}

Tensor& EncoderParams::param(const std::string& name) {
  for (auto& p : params)
    if (p.name == name) return p.value;
  throw ConfigError("encoder has no parameter " + name);
}

const Tensor& EncoderParams::param(const std::string& name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw ConfigError("encoder has no parameter " + name);
}

Tensor& EncoderParams::buffer(const std::string& name) {
  for (auto& b : buffers)
    if (b.name == name) return b.value;
  throw ConfigError("encoder has no buffer " + name);
}

std::vector<Tensor> EncoderParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

std::uint64_t EncoderParams::checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Tensor& t) {
    for (float v : t.data()) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      for (int i = 0; i < 4; ++i) {
        h ^= (bits >> (8 * i)) & 0xFFu;
        h *= 1099511628211ull;
      }
    }
  };
  for (const auto& p : params) mix(p.value);
  for (const auto& b : buffers) mix(b.value);
  return h;
}

EncoderParams EncoderParams::clone() const {
  EncoderParams out;
  out.config = config;
  out.seed = seed;
  out.step = step;
  for (const auto& p : params) {
    auto t = p.value.clone();
    t.set_requires_grad(true);
    out.params.push_back({p.name, t});
  }
  for (const auto& b : buffers) out.buffers.push_back({b.name, b.value.clone()});
  return out;
}

namespace {

struct Builder {
  EncoderParams& out;
  std::mt19937_64& rng;

  void conv(const std::string& name, std::size_t o, std::size_t c, std::size_t k) {
    const double fan_in = static_cast<double>(c * k * k);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    std::vector<float> w(o * c * k * k);
    for (auto& v : w) v = static_cast<float>(dist(rng));
    out.params.push_back({name + ".weight", Tensor::from({o, c, k, k}, std::move(w), true)});
  }

  void bn(const std::string& name, std::size_t c, float gamma = 1.0f) {
    out.params.push_back({name + ".weight", Tensor::full({c}, gamma, true)});
    out.params.push_back({name + ".bias", Tensor::zeros({c}, true)});
    out.buffers.push_back({name + ".running_mean", Tensor::zeros({c})});
    out.buffers.push_back({name + ".running_var", Tensor::full({c}, 1.0f)});
  }

  void linear(const std::string& name, std::size_t o, std::size_t in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<float> w(o * in);
    for (auto& v : w) v = static_cast<float>(dist(rng));
    out.params.push_back({name + ".weight", Tensor::from({o, in}, std::move(w), true)});
    out.params.push_back({name + ".bias", Tensor::zeros({o}, true)});
  }
};

std::string block_name(std::size_t stage, std::size_t block) {
  return "stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

bool has_projection(const EncoderConfig& cfg, std::size_t stage, std::size_t block) {
  if (block != 0) return false;
  const std::size_t in = stage == 0 ? cfg.widths[0] : cfg.widths[stage - 1];
  return stage > 0 || in != cfg.widths[stage];
}

}  // namespace

EncoderParams init_encoder(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  EncoderParams p;
  p.config = config;
  p.seed = seed;
  std::mt19937_64 rng(seed);
  Builder b{p, rng};
  b.conv("stem.conv", config.widths[0], config.in_channels, 3);
  b.bn("stem.bn", config.widths[0]);
  std::size_t in = config.widths[0];
  for (std::size_t s = 0; s < config.widths.size(); ++s) {
    const std::size_t width = config.widths[s];
    for (std::size_t k = 0; k < config.blocks_per_stage; ++k) {
      const auto name = block_name(s, k);
      b.conv(name + ".conv1", width, in, 3);
      b.bn(name + ".bn1", width);
      b.conv(name + ".conv2", width, width, 3);
      b.bn(name + ".bn2", width, config.zero_init_residual ? 0.0f : 1.0f);
      if (has_projection(config, s, k)) {
        b.conv(name + ".shortcut.conv", width, in, 1);
        b.bn(name + ".shortcut.bn", width);
      }
      in = width;
    }
  }
  b.linear("head", config.embed_dim, in);
  return p;
}

namespace {

Tensor conv_bn(EncoderParams& p, const std::string& conv, const std::string& bn, const Tensor& x,
               ops::Conv2dOptions opt, bool training) {
  auto y = ops::conv2d(x, p.param(conv + ".weight"), opt);
  return ops::batch_norm(y, p.param(bn + ".weight"), p.param(bn + ".bias"), p.buffer(bn + ".running_mean"),
                         p.buffer(bn + ".running_var"), {.training = training});
}

}  // namespace

Tensor encode(EncoderParams& params, const Tensor& batch, bool training) {
  const auto& cfg = params.config;
  if (batch.rank() != 4 || batch.dim(1) != cfg.in_channels || batch.dim(2) != cfg.input_size ||
      batch.dim(3) != cfg.input_size) {
    throw DimensionError("encode: expected [b x " + std::to_string(cfg.in_channels) + " x " +
                         std::to_string(cfg.input_size) + " x " + std::to_string(cfg.input_size) + "], got " +
                         shape_str(batch.shape()));
  }
  auto x = ops::relu(conv_bn(params, "stem.conv", "stem.bn", batch, {1, 1}, training));
  for (std::size_t s = 0; s < cfg.widths.size(); ++s) {
    for (std::size_t k = 0; k < cfg.blocks_per_stage; ++k) {
      const auto name = block_name(s, k);
      const std::size_t stride = (s > 0 && k == 0) ? 2 : 1;
      auto h = ops::relu(conv_bn(params, name + ".conv1", name + ".bn1", x, {stride, 1}, training));
      h = conv_bn(params, name + ".conv2", name + ".bn2", h, {1, 1}, training);
      auto shortcut = has_projection(cfg, s, k)
                          ? conv_bn(params, name + ".shortcut.conv", name + ".shortcut.bn", x, {stride, 0}, training)
                          : x;
      x = ops::relu(ops::add(h, shortcut));
    }
  }
  auto pooled = ops::adaptive_avg_pool2d(x, 1, 1);
  auto flat = ops::reshape(pooled, {pooled.dim(0), pooled.dim(1)});
  return ops::linear(flat, params.param("head.weight"), params.param("head.bias"));
}

std::vector<float> embed_all(EncoderParams& params, const std::vector<float>& inputs, std::size_t count,
                             std::size_t chunk) {
  const auto& cfg = params.config;
  const std::size_t per = cfg.in_channels * cfg.input_size * cfg.input_size;
  if (inputs.size() != count * per) throw DimensionError("embed_all: input size mismatch");
  autograd::NoGradGuard guard;
  std::vector<float> out;
  out.reserve(count * cfg.embed_dim);
  for (std::size_t start = 0; start < count; start += chunk) {
    const std::size_t b = std::min(chunk, count - start);
    std::vector<float> slab(inputs.begin() + static_cast<std::ptrdiff_t>(start * per),
                            inputs.begin() + static_cast<std::ptrdiff_t>((start + b) * per));
    auto y = encode(params, Tensor::from({b, cfg.in_channels, cfg.input_size, cfg.input_size}, std::move(slab)), false);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

}  // namespace pimc
