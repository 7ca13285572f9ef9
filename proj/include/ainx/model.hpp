#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "ainx/kernels.hpp"
#include "ainx/ops.hpp"
#include "ainx/optim.hpp"
#include "ainx/tensor.hpp"

namespace ainx::model {

/// Architecture hyperparameters. Spatial axes are H = time, W = frequency.
struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t stem_kernel_h = 5;
  std::size_t stem_kernel_w = 7;
  std::size_t stem_stride = 2;
  /// 0 means stage_channels[0].
  std::size_t stem_out = 0;
  std::array<std::size_t, 4> stage_channels{64, 128, 256, 512};
  std::array<std::size_t, 4> stage_depths{3, 4, 6, 3};
  std::size_t expansion = 4;
  std::vector<std::size_t> branch_kernels{3, 11, 21};
  std::size_t downsample_stride = 2;
  std::size_t num_classes = 44;

  std::size_t resolved_stem_out() const { return stem_out ? stem_out : stage_channels[0]; }

  /// Throws std::invalid_argument listing every violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class Mode { train, eval };
enum class BnPolicy { none, freeze_all_except_stem_first };
enum class InitScheme { he_uniform, lecun_uniform };

BnPolicy parse_bn_policy(const std::string& name);
std::string to_string(BnPolicy policy);
InitScheme parse_init_scheme(const std::string& name);
std::string to_string(InitScheme scheme);

template <typename T>
struct Conv2dLayer {
  std::string name;
  BasicTensor<T> weight;  // [Cout, Cin/groups, kh, kw]
  BasicTensor<T> bias;    // undefined when followed by batch norm
  ConvSpec spec;

  BasicTensor<T> forward(const BasicTensor<T>& x) const { return conv2d(x, weight, bias, spec); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1) * spec.groups; }
};

template <typename T>
struct BatchNormLayer {
  std::string name;
  BasicTensor<T> gamma;
  BasicTensor<T> beta;
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  bool frozen = false;

  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode);
  std::size_t channels() const { return gamma.dim(0); }
};

/// DWConv(1 x k) -> BN -> ReLU -> DWConv(k x 1) -> BN -> ReLU. The 1 x k
/// kernel runs along frequency (W), the k x 1 kernel along time (H).
template <typename T>
struct Branch {
  std::size_t kernel = 0;
  Conv2dLayer<T> dw_1xk;
  BatchNormLayer<T> bn_1xk;
  Conv2dLayer<T> dw_kx1;
  BatchNormLayer<T> bn_kx1;
};

/// x + BN(squeeze(ReLU(expand(sum of branches(x))))).
template <typename T>
struct Block {
  std::string name;
  std::size_t channels = 0;
  std::vector<Branch<T>> branches;
  Conv2dLayer<T> expand;   // 1x1, C -> E*C, with bias
  Conv2dLayer<T> squeeze;  // 1x1, E*C -> C
  BatchNormLayer<T> bn;    // gamma starts at 0
};

template <typename T>
struct Stage {
  std::string name;
  bool has_downsample = false;
  Conv2dLayer<T> downsample;  // 1x1, stride 2
  BatchNormLayer<T> downsample_bn;
  std::vector<Block<T>> blocks;
};

template <typename T>
struct Stem {
  Conv2dLayer<T> conv;
  BatchNormLayer<T> bn;
  PoolSpec pool;
};

template <typename T>
struct Head {
  BasicTensor<T> weight;  // [num_classes, C4]
  BasicTensor<T> bias;
};

/// Builds one block with named parameters under `name`; weights are zero
/// until init_parameters (or init_block) runs.
template <typename T>
Block<T> make_block(const std::string& name, std::size_t channels, std::size_t expansion,
                    const std::vector<std::size_t>& branch_kernels);

template <typename T>
BasicTensor<T> block_forward(const BasicTensor<T>& x, Block<T>& block, Mode mode);

template <typename T>
void init_block(Block<T>& block, std::mt19937_64& rng, InitScheme scheme = InitScheme::he_uniform);

/// Stem, four stages, global average pooling and a linear head.
template <typename T>
class BasicModel {
 public:
  explicit BasicModel(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// [N, in_channels, T, F] -> [N, num_classes].
  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode);

  /// Fan-in scaled uniform weights, zero biases, BN gamma 1 / beta 0 except
  /// the squeeze BN of every block (gamma 0). Running statistics reset.
  void init_parameters(std::mt19937_64& rng, InitScheme scheme = InitScheme::he_uniform);

  /// New freshly initialized head; backbone tensors are left untouched.
  void replace_head(std::size_t num_classes, std::mt19937_64& rng, InitScheme scheme = InitScheme::he_uniform);

  void set_bn_policy(BnPolicy policy);
  BnPolicy bn_policy() const { return bn_policy_; }

  /// Every learnable tensor, frozen or not, in build order.
  std::vector<BasicNamedTensor<T>> named_parameters() const;
  /// Learnable tensors that receive updates under the current BN policy.
  std::vector<BasicNamedTensor<T>> trainable_parameters() const;
  /// Batch-norm running statistics.
  std::vector<BasicNamedTensor<T>> named_buffers() const;
  /// Parameters followed by buffers: everything a checkpoint stores.
  std::vector<BasicNamedTensor<T>> state() const;

  std::vector<const BatchNormLayer<T>*> batch_norms() const;
  std::size_t trainable_batch_norm_count() const;

  void zero_grad();

  Stem<T>& stem() { return stem_; }
  const Stem<T>& stem() const { return stem_; }
  std::vector<Stage<T>>& stages() { return stages_; }
  const std::vector<Stage<T>>& stages() const { return stages_; }
  Head<T>& head() { return head_; }
  const Head<T>& head() const { return head_; }

 private:
  std::vector<BatchNormLayer<T>*> mutable_batch_norms();

  ModelConfig config_;
  Stem<T> stem_;
  std::vector<Stage<T>> stages_;
  Head<T> head_;
  BnPolicy bn_policy_ = BnPolicy::none;
};

using Model = BasicModel<float>;

template <typename T>
BasicModel<T> build_model(const ModelConfig& config) {
  return BasicModel<T>(config);
}

/// Spatial extents after the stem and after each stage for an H x W input.
/// Throws std::invalid_argument naming the first stage where an extent
/// collapses to zero.
std::vector<std::array<std::size_t, 2>> stage_extents(const ModelConfig& config, std::size_t h, std::size_t w);

extern template class BasicModel<float>;
extern template class BasicModel<double>;

}  // namespace ainx::model
