#pragma once

#include <cstdint>
#include <span>

#include "ainx/kernels.hpp"
#include "ainx/tensor.hpp"

namespace ainx {

/// How batch_norm treats statistics and its affine parameters.
///  - train:  normalize by batch statistics, update running statistics.
///  - eval:   normalize by running statistics.
///  - frozen: like eval, and additionally no gradient reaches gamma/beta.
enum class BnMode { train, eval, frozen };

struct BatchNormOptions {
  BnMode mode = BnMode::train;
  double eps = 1e-5;
  double momentum = 0.1;  // running = (1 - momentum) * running + momentum * batch
};

/// Cross-correlation with zero padding. `bias` may be undefined.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const ConvSpec& spec);

/// Per-channel normalization over N,H,W. Running statistics are updated in
/// place in train mode; the running variance uses the unbiased estimate.
template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                          BasicTensor<T>& running_var, const BatchNormOptions& options);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& input, const PoolSpec& spec);

/// [N,C,H,W] -> [N,C]
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input);

/// [N,Din] x [Dout,Din]^T + [Dout] -> [N,Dout]. `bias` may be undefined.
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias);

/// Mean over the batch of -log softmax(logits)[label]; returns a scalar.
template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                     std::span<const std::int32_t> labels);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Elementwise product of equal shapes.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Sum of all elements as a scalar.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input);

}  // namespace ainx
