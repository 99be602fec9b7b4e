#include "pimc/tensor.hpp"

#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "pimc/errors.hpp"

namespace pimc {

namespace {

// Activation buffers are large and short-lived; keeping them on the heap
// instead of fresh mmap pages avoids a page-fault storm every step.
[[maybe_unused]] const bool heap_tuned = [] {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
  return true;
}();

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor make_result(Shape shape, std::vector<float> values, bool requires_grad) {
  auto node = std::make_shared<TensorNode>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return make_result(std::move(shape), std::vector<float>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from: shape " + shape_str(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
  }
  return make_result(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return make_result(Shape{1}, std::vector<float>{value}, requires_grad);
}

float Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
  return node_->data[0];
}

std::span<float> Tensor::grad_buffer() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0f);
  return node_->grad;
}

Tensor Tensor::clone() const {
  return make_result(node_->shape, node_->data, false);
}

namespace autograd {
namespace {

thread_local bool g_enabled = true;
thread_local std::vector<std::function<void()>> g_tape;

}  // namespace

bool grad_enabled() { return g_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_enabled) { g_enabled = false; }
NoGradGuard::~NoGradGuard() { g_enabled = previous_; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!g_enabled) return false;
  for (const auto* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void record(std::function<void()> backward_fn) { g_tape.push_back(std::move(backward_fn)); }

std::size_t tape_size() { return g_tape.size(); }

void clear_tape() { g_tape.clear(); }

void backward(Tensor& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) {
    clear_tape();
    return;
  }
  loss.grad_buffer()[0] += 1.0f;
  // Closures may be appended while replaying only if user code misbehaves;
  // move the tape out so it is freed even on exceptions.
  auto tape = std::move(g_tape);
  g_tape.clear();
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) (*it)();
}

}  // namespace autograd

}  // namespace pimc
