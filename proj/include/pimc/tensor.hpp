#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pimc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
};

/// Dense row-major float tensor handle. Copies share storage; use clone()
/// for an independent buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<const float> data() const { return node_->data; }
  std::span<float> mutable_data() { return node_->data; }
  float item() const;
  float at(std::size_t flat) const { return node_->data.at(flat); }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const float> grad() const { return node_->grad; }
  std::span<float> grad_buffer();  // allocates zeros on first use
  void zero_grad() { node_->grad.clear(); }

  /// Independent copy of the values, detached from any graph.
  Tensor clone() const;

  std::shared_ptr<TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<TensorNode> node_;

  friend Tensor make_result(Shape shape, std::vector<float> values, bool requires_grad);
};

Tensor make_result(Shape shape, std::vector<float> values, bool requires_grad);

namespace autograd {

bool grad_enabled();

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// True when an op over these inputs must record a backward closure.
bool should_record(std::initializer_list<const Tensor*> inputs);

/// Appends a backward closure to the thread-local tape.
void record(std::function<void()> backward_fn);

std::size_t tape_size();

/// Drops every recorded closure without running it.
void clear_tape();

/// Seeds d(loss)/d(loss) = 1, replays the tape in reverse and frees it.
/// `loss` must be a single-element tensor.
void backward(Tensor& loss);

}  // namespace autograd

}  // namespace pimc
