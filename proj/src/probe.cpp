#include "pimc/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "pimc/adam.hpp"
#include "pimc/errors.hpp"
#include "pimc/ops.hpp"

namespace pimc {

const char* attach_name(AttachMode mode) { return mode == AttachMode::Frozen ? "frozen" : "finetune"; }

AttachMode parse_attach(const std::string& name) {
  if (name == "frozen") return AttachMode::Frozen;
  if (name == "finetune") return AttachMode::Finetune;
  throw ConfigError("unknown probe mode '" + name + "' (expected frozen or finetune)");
}

void HeadConfig::validate() const {
  if (kind == HeadKind::Classifier && outputs < 2) throw DomainError("classifier head needs at least 2 classes");
  if (kind == HeadKind::Forecaster && outputs < 1) throw DomainError("forecaster horizon must be >= 1");
  if (batch_size == 0) throw DomainError("probe batch size must be positive");
}

Tensor ProbeHead::forward(const Tensor& features) const {
  auto x = ops::linear(features, standardize_weight, standardize_bias);
  if (config.hidden > 0) {
    x = ops::relu(ops::linear(x, params[0].value, params[1].value));
    return ops::linear(x, params[2].value, params[3].value);
  }
  return ops::linear(x, params[0].value, params[1].value);
}

std::vector<Tensor> ProbeHead::trainable() const {
  std::vector<Tensor> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

namespace {

void add_linear(std::vector<NamedTensor>& out, const std::string& name, std::size_t o, std::size_t in,
                std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<float> w(o * in);
  for (auto& v : w) v = static_cast<float>(dist(rng));
  out.push_back({name + ".weight", Tensor::from({o, in}, std::move(w), true)});
  out.push_back({name + ".bias", Tensor::zeros({o}, true)});
}

Tensor identity(std::size_t d) {
  std::vector<float> v(d * d, 0.0f);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0f;
  return Tensor::from({d, d}, std::move(v));
}

Tensor head_loss(const ProbeHead& head, const Tensor& outputs, const ProbeTargets& targets,
                 std::span<const std::size_t> rows) {
  if (head.config.kind == HeadKind::Classifier) {
    std::vector<std::size_t> t(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) t[i] = targets.classes[rows[i]];
    return ops::softmax_cross_entropy_rows(outputs, t);
  }
  const std::size_t k = head.config.outputs;
  std::vector<float> t(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(targets.values.begin() + static_cast<std::ptrdiff_t>(rows[i] * k), k,
                t.begin() + static_cast<std::ptrdiff_t>(i * k));
  }
  return ops::mse_loss(outputs, Tensor::from({rows.size(), k}, std::move(t)));
}

void check_targets(const ProbeHead& head, const ProbeTargets& targets, std::size_t n) {
  if (head.config.kind == HeadKind::Classifier) {
    if (targets.classes.size() != n) throw DimensionError("probe: one class target per sample required");
    for (auto c : targets.classes)
      if (c >= head.config.outputs) throw DomainError("probe: class target out of range");
  } else if (targets.values.size() != n * head.config.outputs) {
    throw DimensionError("probe: forecaster targets must be n x outputs");
  }
}

std::vector<float> gather_rows(std::span<const float> src, std::span<const std::size_t> rows, std::size_t width) {
  std::vector<float> out(rows.size() * width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(rows[i] * width), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return out;
}

template <typename StepFn>
void run_epochs(std::size_t epochs, std::size_t n, std::size_t batch, std::mt19937_64& rng, StepFn step) {
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t b = std::min(batch, n - start);
      if (b < 2 && n >= 2) continue;
      step(std::span<const std::size_t>(order).subspan(start, b));
    }
  }
}

}  // namespace

ProbeHead init_head(const HeadConfig& config, std::size_t in_dim, std::uint64_t seed) {
  config.validate();
  if (in_dim == 0) throw DomainError("probe: feature dimension must be positive");
  ProbeHead head;
  head.config = config;
  head.in_dim = in_dim;
  head.standardize_weight = identity(in_dim);
  head.standardize_bias = Tensor::zeros({in_dim});
  std::mt19937_64 rng(seed);
  if (config.hidden > 0) {
    add_linear(head.params, "hidden", config.hidden, in_dim, rng);
    add_linear(head.params, "out", config.outputs, config.hidden, rng);
  } else {
    add_linear(head.params, "out", config.outputs, in_dim, rng);
  }
  return head;
}

void fit_standardization(ProbeHead& head, std::span<const float> features, std::size_t n) {
  const std::size_t d = head.in_dim;
  if (features.size() != n * d || n == 0) throw DimensionError("fit_standardization: expected n x d features");
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += features[i * d + j];
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = features[i * d + j] - mean[j];
      var[j] += c * c;
    }
  }
  std::vector<float> w(d * d, 0.0f), b(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j] / static_cast<double>(n));
    const double inv = sd > 1e-6 ? 1.0 / sd : 0.0;
    w[j * d + j] = static_cast<float>(inv);
    b[j] = static_cast<float>(-mean[j] * inv);
  }
  head.standardize_weight = Tensor::from({d, d}, std::move(w));
  head.standardize_bias = Tensor::from({d}, std::move(b));
}

void train_head(ProbeHead& head, std::span<const float> features, std::size_t n, const ProbeTargets& targets) {
  if (features.size() != n * head.in_dim) throw DimensionError("train_head: expected n x d features");
  check_targets(head, targets, n);
  auto params = head.trainable();
  auto opt = make_adam(params, head.config.lr, head.config.weight_decay);
  std::mt19937_64 rng(head.config.seed);
  run_epochs(head.config.epochs, n, head.config.batch_size, rng, [&](std::span<const std::size_t> rows) {
    autograd::clear_tape();
    auto x = Tensor::from({rows.size(), head.in_dim}, gather_rows(features, rows, head.in_dim));
    auto loss = head_loss(head, head.forward(x), targets, rows);
    for (auto& p : params) p.zero_grad();
    autograd::backward(loss);
    adam_step(params, opt);
  });
}

void finetune(ProbeHead& head, EncoderParams& encoder, std::span<const float> inputs, std::size_t n,
              const ProbeTargets& targets) {
  const auto& cfg = encoder.config;
  const std::size_t per = cfg.in_channels * cfg.input_size * cfg.input_size;
  if (inputs.size() != n * per) throw DimensionError("finetune: expected n x c x s x s inputs");
  if (cfg.embed_dim != head.in_dim) throw DimensionError("finetune: head does not match encoder width");
  check_targets(head, targets, n);
  auto head_params = head.trainable();
  auto enc_params = encoder.trainable();
  auto head_opt = make_adam(head_params, head.config.lr, head.config.weight_decay);
  auto enc_opt = make_adam(enc_params, head.config.lr * head.config.encoder_lr_scale, head.config.weight_decay);
  std::mt19937_64 rng(head.config.seed ^ 0x5f0e7ull);
  run_epochs(head.config.finetune_epochs, n, head.config.batch_size, rng, [&](std::span<const std::size_t> rows) {
    autograd::clear_tape();
    auto x = Tensor::from({rows.size(), cfg.in_channels, cfg.input_size, cfg.input_size},
                          gather_rows(inputs, rows, per));
    auto loss = head_loss(head, head.forward(encode(encoder, x, false)), targets, rows);
    for (auto& p : head_params) p.zero_grad();
    for (auto& p : enc_params) p.zero_grad();
    autograd::backward(loss);
    adam_step(head_params, head_opt);
    adam_step(enc_params, enc_opt);
  });
}

std::vector<float> head_outputs(const ProbeHead& head, std::span<const float> features, std::size_t n) {
  if (features.size() != n * head.in_dim) throw DimensionError("head_outputs: expected n x d features");
  autograd::NoGradGuard guard;
  std::vector<float> out;
  out.reserve(n * head.config.outputs);
  constexpr std::size_t chunk = 256;
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t b = std::min(chunk, n - start);
    std::vector<float> x(features.begin() + static_cast<std::ptrdiff_t>(start * head.in_dim),
                         features.begin() + static_cast<std::ptrdiff_t>((start + b) * head.in_dim));
    auto y = head.forward(Tensor::from({b, head.in_dim}, std::move(x)));
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

std::vector<std::size_t> argmax_rows(std::span<const float> outputs, std::size_t n, std::size_t k) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = outputs.subspan(i * k, k);
    out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace pimc
