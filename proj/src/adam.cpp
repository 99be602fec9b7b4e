#include "pimc/adam.hpp"

#include <cmath>

#include "pimc/errors.hpp"

namespace pimc {

AdamState make_adam(const std::vector<Tensor>& params, float lr, float weight_decay) {
  if (!(lr >= 0.0f)) throw DomainError("adam: learning rate must be non-negative");
  if (!(weight_decay >= 0.0f)) throw DomainError("adam: weight decay must be non-negative");
  AdamState s;
  s.lr = lr;
  s.weight_decay = weight_decay;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.numel(), 0.0f);
    s.second_moment.emplace_back(p.numel(), 0.0f);
  }
  return s;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (params.size() != state.first_moment.size() || params.size() != state.second_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters vs " +
                         std::to_string(state.first_moment.size()) + " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].numel() || state.second_moment[i].size() != params[i].numel()) {
      throw DimensionError("adam_step: moment buffer " + std::to_string(i) + " does not match parameter shape " +
                           shape_str(params[i].shape()));
    }
    for (float g : params[i].grad()) {
      if (!std::isfinite(g)) {
        throw NumericalError("adam_step: non-finite gradient in parameter " + std::to_string(i) + " " +
                             shape_str(params[i].shape()) + "; update rejected");
      }
    }
  }
  const std::int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), static_cast<double>(t));
  const double step_size = state.lr / bc1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_data();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const float g = (grad.empty() ? 0.0f : grad[j]) + state.weight_decay * theta[j];
      m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g * g;
      const double denom = std::sqrt(v[j] / bc2) + state.eps;
      theta[j] = static_cast<float>(theta[j] - step_size * m[j] / denom);
    }
  }
  state.step = t;
}

}  // namespace pimc
