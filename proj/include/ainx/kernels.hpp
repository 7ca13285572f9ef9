#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "ainx/tensor.hpp"

namespace ainx {

/// Geometry of a 2-D cross-correlation. `groups` must divide both channel
/// counts; groups == in_channels == out_channels is a depthwise conv.
struct ConvSpec {
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 0;
  std::size_t pad_w = 0;
  std::size_t groups = 1;

  /// Stride-1 spec with (k-1)/2 padding on each axis.
  static ConvSpec same(std::size_t kernel_h, std::size_t kernel_w, std::size_t groups = 1);
};

struct PoolSpec {
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;
  std::size_t pad_h = 1;
  std::size_t pad_w = 1;
};

/// floor((in + 2 pad - kernel) / stride) + 1, or 0 when the window does not fit.
std::size_t output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

namespace kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  ConvSpec spec;

  /// Validates an N,C,H,W input against a Cout,Cin/groups,kh,kw weight.
  /// Throws std::invalid_argument naming the offending dimension.
  static ConvGeometry make(const Shape& input, const Shape& weight, const ConvSpec& spec);

  std::size_t in_per_group() const { return in_channels / spec.groups; }
  std::size_t out_per_group() const { return out_channels / spec.groups; }
  std::size_t input_size() const { return batch * in_channels * in_h * in_w; }
  std::size_t output_size() const { return batch * out_channels * out_h * out_w; }
  std::size_t weight_size() const {
    return out_channels * in_per_group() * spec.kernel_h * spec.kernel_w;
  }
};

struct PoolGeometry {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  PoolSpec spec;

  static PoolGeometry make(const Shape& input, const PoolSpec& spec);
  std::size_t output_size() const { return batch * channels * out_h * out_w; }
};

// OpenMP-parallel kernels. Every output element is produced by a single
// thread in a fixed order, so results do not depend on the thread count.
// The backward kernels accumulate into their destination.

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output,
                           std::span<const T> weight, std::span<T> grad_input);

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> grad_output,
                            std::span<const T> input, std::span<T> grad_weight);

template <typename T>
void conv2d_backward_bias(const ConvGeometry& g, std::span<const T> grad_output,
                          std::span<T> grad_bias);

/// `argmax` receives the in-plane index of the selected element; ties keep
/// the first element in scan order.
template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                        std::span<std::uint32_t> argmax);

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, std::span<const T> grad_output,
                         std::span<const std::uint32_t> argmax, std::span<T> grad_input);

}  // namespace kernels
}  // namespace ainx
