#pragma once

#include <cstddef>
#include <span>

#include "pimc/tensor.hpp"

// Differentiable kernels. Every op records a backward closure on the
// thread-local tape when gradients are enabled and an input requires them.
// Parameters and activations are f32; reductions accumulate in f64.

namespace pimc::ops {

Tensor matmul(const Tensor& a, const Tensor& b);

/// x[b x in] * weight[out x in]^T + bias[out]. `bias` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor add(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor mul_scalar(const Tensor& x, float s);

/// x * s for a single-element tensor s (gradient flows to both).
Tensor scale_by(const Tensor& x, const Tensor& s);

Tensor exp(const Tensor& x);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Cross-correlation of x[b x c x h x w] with kernel[o x c x kh x kw], no bias.
Tensor conv2d(const Tensor& x, const Tensor& kernel, Conv2dOptions opt = {});

struct BatchNormOptions {
  bool training = true;
  float momentum = 0.1f;
  float eps = 1e-5f;
};

/// Per-channel normalization over x[b x c x ...]. In training mode the batch
/// statistics are used and the running buffers are updated in place
/// (running_var receives the unbiased estimate); in eval mode the running
/// buffers are used.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, BatchNormOptions opt = {});

/// x[b x c x h x w] -> [b x c x oh x ow] with PyTorch-style adaptive bins.
Tensor adaptive_avg_pool2d(const Tensor& x, std::size_t oh, std::size_t ow);

/// Rows of x[n x d] scaled to unit L2 norm; norms below eps are replaced
/// by eps. When `guarded_rows` is non-null it receives the number of such rows.
Tensor l2_normalize_rows(const Tensor& x, float eps = 1e-8f, std::size_t* guarded_rows = nullptr);

/// Mean over rows of -log softmax(row)[target], row-max stabilized.
Tensor softmax_cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets);

/// Mean squared error against a constant target of the same shape.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

}  // namespace pimc::ops
