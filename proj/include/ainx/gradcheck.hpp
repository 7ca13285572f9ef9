#pragma once

#include <functional>
#include <span>
#include <string>

#include "ainx/tensor.hpp"

namespace ainx {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;    // index into the checked inputs
  std::size_t worst_element = 0;  // flat index within that input
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Scalar-valued computation over 64-bit tensors. It must rebuild its graph
/// from the given inputs on every call.
using ScalarFunction = std::function<Tensor64(std::span<const Tensor64>)>;

/// Compares reverse-mode gradients with central differences
/// (f(x+eps) - f(x-eps)) / 2eps for every element of every input. The error
/// of one element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check(const ScalarFunction& f, std::span<Tensor64> inputs, double eps = 1e-6);

}  // namespace ainx
