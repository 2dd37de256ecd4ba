#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "idat/error.hpp"

namespace idat {

std::string shape_str(std::span<const int> shape);

// Validates that every dimension is positive; returns the element count.
std::size_t shape_numel(std::span<const int> shape);

namespace detail {
struct TensorImpl {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // empty until first accumulation
  bool requires_grad = false;
};
}  // namespace detail

// Dense row-major float32 tensor. Copies are shallow handles onto the same
// storage; clone() gives a deep copy. Gradients live next to the data and
// accumulate additively across backward paths.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) {
    const std::size_t n = shape_numel(shape);
    impl_ = std::make_shared<detail::TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data.assign(n, 0.0f);
  }

  Tensor(std::vector<int> shape, std::vector<float> data) {
    const std::size_t n = shape_numel(shape);
    if (n != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
    impl_ = std::make_shared<detail::TensorImpl>();
    impl_->shape = std::move(shape);
    impl_->data = std::move(data);
  }

  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  static Tensor full(std::vector<int> shape, float v) {
    Tensor t(std::move(shape));
    for (float& x : t.impl_->data) x = v;
    return t;
  }

  bool defined() const { return impl_ != nullptr; }

  const std::vector<int>& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int axis) const { return impl_->shape.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const { return impl_->data.size(); }

  std::span<float> values() { return impl_->data; }
  std::span<const float> values() const { return impl_->data; }

  float item() const {
    if (size() != 1) {
      throw UsageError("item() requires a single-element tensor, got shape " +
                       shape_str(impl_->shape));
    }
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool grad_allocated() const { return !impl_->grad.empty(); }

  // Absent gradient means zero. ensure_grad materializes the zero buffer.
  std::span<float> grad() { return impl_->grad; }
  std::span<const float> grad() const { return impl_->grad; }

  void ensure_grad() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  }

  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0f);
  }

  // True when the gradient is absent or all zeros.
  bool grad_is_zero() const {
    for (float g : impl_->grad)
      if (g != 0.0f) return false;
    return true;
  }

  // Deep copy of shape/data and the requires_grad flag; gradient not copied.
  Tensor clone() const {
    Tensor t;
    t.impl_ = std::make_shared<detail::TensorImpl>();
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    t.impl_->requires_grad = impl_->requires_grad;
    return t;
  }

  // Deep copy that never tracks gradients.
  Tensor detached() const {
    Tensor t = clone();
    t.impl_->requires_grad = false;
    return t;
  }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Records one closure per differentiable operation, in creation order.
// backward() seeds d(loss)/d(loss)=1 and replays the closures in reverse,
// accumulating into each reachable tensor's grad buffer. A tape is spent
// after one backward; reset() clears it for reuse.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(BackwardFn fn) { nodes_.push_back(std::move(fn)); }

  std::size_t node_count() const { return nodes_.size(); }
  bool spent() const { return spent_; }

  void backward(const Tensor& loss) {
    if (spent_) {
      throw UsageError("backward called twice on the same tape without reset");
    }
    if (!loss.defined() || loss.size() != 1) {
      throw UsageError("backward requires a scalar loss of shape [1]");
    }
    Tensor seed = loss;
    seed.ensure_grad();
    seed.grad()[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    spent_ = true;
  }

  void reset() {
    nodes_.clear();
    spent_ = false;
  }

 private:
  std::vector<BackwardFn> nodes_;
  bool spent_ = false;
};

}  // namespace idat
