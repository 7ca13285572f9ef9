#include "ainx/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace ainx {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  return out.str();
}

namespace {
thread_local bool g_grad_enabled = true;

void check_shape(const Shape& shape) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw std::invalid_argument("tensor extent " + std::to_string(i) + " is zero in shape " +
                                  shape_to_string(shape));
    }
  }
}
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool NoGradGuard::grad_enabled() { return g_grad_enabled; }

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->data.assign(shape_numel(shape), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return BasicTensor(std::move(impl));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_data(Shape shape, std::vector<T> data, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_to_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return BasicTensor(std::move(impl));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return full({1}, value, requires_grad);
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("item() on tensor of shape " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  return from_data(impl_->shape, impl_->data, impl_->requires_grad);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return from_data(impl_->shape, impl_->data, false);
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got shape " +
                                (loss.defined() ? shape_to_string(loss.shape()) : "undefined"));
  }
  using Impl = detail::TensorImpl<T>;
  const auto& root = loss.impl();
  if (!root->requires_grad) return;

  // Iterative post-order DFS gives a topological order with inputs first.
  std::vector<Impl*> order;
  std::unordered_set<Impl*> visited;
  std::vector<std::pair<Impl*, std::size_t>> stack{{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& fn = node->grad_fn;
    if (fn && next < fn->inputs.size()) {
      Impl* child = fn->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  detail::grad_buffer(*root)[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Impl* node = *it;
    if (!node->grad_fn || node->grad.empty()) continue;
    node->grad_fn->backward(node->grad);
    if (!node->retain_grad && node != root.get()) {
      node->grad.clear();
      node->grad.shrink_to_fit();
    }
  }
}

template <typename To, typename From>
BasicTensor<To> cast(const BasicTensor<From>& source, bool requires_grad) {
  std::vector<To> data(source.data().begin(), source.data().end());
  return BasicTensor<To>::from_data(source.shape(), std::move(data), requires_grad);
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void backward(const BasicTensor<float>&);
template void backward(const BasicTensor<double>&);
template BasicTensor<double> cast(const BasicTensor<float>&, bool);
template BasicTensor<float> cast(const BasicTensor<double>&, bool);
template BasicTensor<float> cast(const BasicTensor<float>&, bool);
template BasicTensor<double> cast(const BasicTensor<double>&, bool);

}  // namespace ainx
