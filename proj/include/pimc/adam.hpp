#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pimc/tensor.hpp"

namespace pimc {

struct AdamState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::int64_t step = 0;
  float lr = 1e-3f;
  float weight_decay = 0.0f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

AdamState make_adam(const std::vector<Tensor>& params, float lr, float weight_decay);

/// One bias-corrected Adam update using the gradients stored on `params`.
/// Weight decay is coupled: lambda * theta is added to the gradient.
/// Parameters without a gradient are treated as having a zero gradient.
/// Throws NumericalError, leaving params and state untouched, when any
/// gradient is non-finite.
void adam_step(std::vector<Tensor>& params, AdamState& state);

}  // namespace pimc
