#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ainx {

/// Extents of a dense row-major tensor. Activations use N,C,H,W with
/// H the time axis and W the frequency axis.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

template <typename T>
class BasicTensor;

namespace detail {

template <typename T>
struct Node;

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;
  bool retain_grad = false;
  std::shared_ptr<Node<T>> grad_fn;
};

template <typename T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

/// A recorded op: the tensors it read and a closure that pushes the output
/// gradient into them.
template <typename T>
struct Node {
  const char* op = "";
  std::vector<ImplPtr<T>> inputs;
  std::function<void(std::span<const T>)> backward;
};

/// Returns the gradient buffer of `impl`, allocating zeros on first use.
template <typename T>
std::span<T> grad_buffer(TensorImpl<T>& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), T(0));
  return impl.grad;
}

}  // namespace detail

/// Scoped switch that stops ops from recording the autodiff graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

/// Reference-counted handle to a dense tensor with an optional gradient slot.
/// Copies share storage; use clone() for a deep copy.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor from_data(Shape shape, std::vector<T> data, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  /// Keep the gradient of a non-leaf tensor after backward().
  void retain_grad() { impl_->retain_grad = true; }
  bool is_leaf() const { return impl_->grad_fn == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return detail::grad_buffer(*impl_); }
  void zero_grad() { impl_->grad.clear(); }

  /// Deep copy of data only; the result is a leaf.
  BasicTensor clone() const;
  /// Leaf view sharing nothing with the graph of this tensor.
  BasicTensor detach() const;

  bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

  // Engine access for op implementations.
  const detail::ImplPtr<T>& impl() const { return impl_; }
  explicit BasicTensor(detail::ImplPtr<T> impl) : impl_(std::move(impl)) {}

 private:
  detail::ImplPtr<T> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Reverse-mode sweep from a scalar loss. Leaf tensors with requires_grad
/// accumulate dLoss/dTensor into their gradient buffers.
template <typename T>
void backward(const BasicTensor<T>& loss);

/// Converts between precisions; the result is a leaf with the given flag.
template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& source, bool requires_grad = false);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace ainx
