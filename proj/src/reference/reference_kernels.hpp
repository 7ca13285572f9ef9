#pragma once

#include <cstdint>
#include <span>

#include "ainx/kernels.hpp"

// Serial nested-loop kernels with explicit bounds checks on every tap.
// They share no code with the parallel kernels and serve as the oracle in
// tests and the baseline in the benchmark.
namespace ainx::reference {

template <typename T>
void conv2d_forward(const kernels::ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias, std::span<T> output);

template <typename T>
void conv2d_backward_input(const kernels::ConvGeometry& g, std::span<const T> grad_output,
                           std::span<const T> weight, std::span<T> grad_input);

template <typename T>
void conv2d_backward_weight(const kernels::ConvGeometry& g, std::span<const T> grad_output,
                            std::span<const T> input, std::span<T> grad_weight);

template <typename T>
void max_pool2d_forward(const kernels::PoolGeometry& g, std::span<const T> input,
                        std::span<T> output);

}  // namespace ainx::reference
