#include "ainx/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ainx::model {

namespace {

template <typename T>
Conv2dLayer<T> make_conv(std::string name, std::size_t in, std::size_t out, ConvSpec spec, bool bias) {
  Conv2dLayer<T> c;
  c.name = std::move(name);
  c.spec = spec;
  c.weight = BasicTensor<T>::zeros({out, in / spec.groups, spec.kernel_h, spec.kernel_w}, true);
  if (bias) c.bias = BasicTensor<T>::zeros({out}, true);
  return c;
}

template <typename T>
BatchNormLayer<T> make_bn(std::string name, std::size_t channels) {
  BatchNormLayer<T> b;
  b.name = std::move(name);
  b.gamma = BasicTensor<T>::full({channels}, T(1), true);
  b.beta = BasicTensor<T>::zeros({channels}, true);
  b.running_mean = BasicTensor<T>::zeros({channels});
  b.running_var = BasicTensor<T>::full({channels}, T(1));
  return b;
}

template <typename T>
void uniform_fill(BasicTensor<T>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-bound, bound);
  for (auto& v : t.mutable_data()) v = T(d(rng));
}

double init_bound(std::size_t fan_in, InitScheme scheme) {
  const double gain = scheme == InitScheme::he_uniform ? 6.0 : 3.0;
  return std::sqrt(gain / double(fan_in));
}

template <typename T>
void init_conv(Conv2dLayer<T>& c, std::mt19937_64& rng, InitScheme scheme) {
  const auto& s = c.weight.shape();
  uniform_fill(c.weight, init_bound(s[1] * s[2] * s[3], scheme), rng);
  if (c.bias.defined()) std::fill(c.bias.mutable_data().begin(), c.bias.mutable_data().end(), T(0));
}

template <typename T>
void init_bn(BatchNormLayer<T>& b, T gamma) {
  std::fill(b.gamma.mutable_data().begin(), b.gamma.mutable_data().end(), gamma);
  std::fill(b.beta.mutable_data().begin(), b.beta.mutable_data().end(), T(0));
  std::fill(b.running_mean.mutable_data().begin(), b.running_mean.mutable_data().end(), T(0));
  std::fill(b.running_var.mutable_data().begin(), b.running_var.mutable_data().end(), T(1));
}

template <typename T>
void push_conv(std::vector<BasicNamedTensor<T>>& out, const Conv2dLayer<T>& c) {
  out.push_back({c.name + ".weight", c.weight});
  if (c.bias.defined()) out.push_back({c.name + ".bias", c.bias});
}

template <typename T>
void push_bn(std::vector<BasicNamedTensor<T>>& out, const BatchNormLayer<T>& b, bool trainable_only) {
  if (trainable_only && b.frozen) return;
  out.push_back({b.name + ".gamma", b.gamma});
  out.push_back({b.name + ".beta", b.beta});
}

template <typename T>
BasicTensor<T> bn_relu(BatchNormLayer<T>& bn, const BasicTensor<T>& x, Mode mode) {
  return relu(bn.forward(x, mode));
}

}  // namespace

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (in_channels < 1) problems.push_back("in_channels must be >= 1");
  if (stem_kernel_h < 1 || stem_kernel_w < 1) problems.push_back("stem kernel extents must be >= 1");
  if (stem_stride < 1) problems.push_back("stem_stride must be >= 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (stage_channels[i] < 1) problems.push_back("stage_channels[" + std::to_string(i) + "] must be >= 1");
    if (stage_depths[i] < 1) problems.push_back("stage_depths[" + std::to_string(i) + "] must be >= 1");
  }
  if (expansion < 1) problems.push_back("expansion must be >= 1");
  if (branch_kernels.empty()) problems.push_back("branch_kernels must not be empty");
  for (std::size_t k : branch_kernels) {
    if (k % 2 == 0) problems.push_back("branch kernel " + std::to_string(k) + " must be odd");
  }
  if (downsample_stride < 1) problems.push_back("downsample_stride must be >= 1");
  if (num_classes < 1) problems.push_back("num_classes must be >= 1");
  if (problems.empty()) return;
  std::string msg = "invalid model config: ";
  for (std::size_t i = 0; i < problems.size(); ++i) msg += (i ? "; " : "") + problems[i];
  throw std::invalid_argument(msg);
}

BnPolicy parse_bn_policy(const std::string& name) {
  if (name == "none") return BnPolicy::none;
  if (name == "freeze_all_except_stem_first") return BnPolicy::freeze_all_except_stem_first;
  throw std::invalid_argument("unknown batch-norm policy '" + name + "'");
}

std::string to_string(BnPolicy policy) {
  return policy == BnPolicy::none ? "none" : "freeze_all_except_stem_first";
}

InitScheme parse_init_scheme(const std::string& name) {
  if (name == "he_uniform") return InitScheme::he_uniform;
  if (name == "lecun_uniform") return InitScheme::lecun_uniform;
  throw std::invalid_argument("unknown init scheme '" + name + "'");
}

std::string to_string(InitScheme scheme) {
  return scheme == InitScheme::he_uniform ? "he_uniform" : "lecun_uniform";
}

std::vector<std::array<std::size_t, 2>> stage_extents(const ModelConfig& config, std::size_t h, std::size_t w) {
  config.validate();
  std::vector<std::array<std::size_t, 2>> out;
  auto check = [&](const std::string& where) {
    if (h == 0 || w == 0) {
      throw std::invalid_argument("input too small: spatial extent collapses to zero in " + where);
    }
  };
  if (h == 0 || w == 0) throw std::invalid_argument("input extents must be positive");
  const std::size_t s = config.stem_stride;
  h = output_extent(h, config.stem_kernel_h, s, config.stem_kernel_h / 2);
  w = output_extent(w, config.stem_kernel_w, s, config.stem_kernel_w / 2);
  check("stem conv");
  const PoolSpec pool;
  h = output_extent(h, pool.kernel_h, pool.stride_h, pool.pad_h);
  w = output_extent(w, pool.kernel_w, pool.stride_w, pool.pad_w);
  check("stem max-pool");
  out.push_back({h, w});
  for (std::size_t i = 0; i < 4; ++i) {
    if (i > 0) {
      h = output_extent(h, 1, config.downsample_stride, 0);
      w = output_extent(w, 1, config.downsample_stride, 0);
      check("stage" + std::to_string(i + 1) + " downsample");
    }
    out.push_back({h, w});
  }
  return out;
}

template <typename T>
BasicTensor<T> BatchNormLayer<T>::forward(const BasicTensor<T>& x, Mode mode) {
  BatchNormOptions opts;
  opts.mode = frozen ? BnMode::frozen : (mode == Mode::train ? BnMode::train : BnMode::eval);
  return batch_norm(x, gamma, beta, running_mean, running_var, opts);
}

template <typename T>
Block<T> make_block(const std::string& name, std::size_t channels, std::size_t expansion,
                    const std::vector<std::size_t>& branch_kernels) {
  Block<T> b;
  b.name = name;
  b.channels = channels;
  for (std::size_t k : branch_kernels) {
    Branch<T> br;
    br.kernel = k;
    const std::string prefix = name + ".branch" + std::to_string(k);
    br.dw_1xk = make_conv<T>(prefix + ".dw_1xk", channels, channels, ConvSpec::same(1, k, channels), false);
    br.bn_1xk = make_bn<T>(prefix + ".bn_1xk", channels);
    br.dw_kx1 = make_conv<T>(prefix + ".dw_kx1", channels, channels, ConvSpec::same(k, 1, channels), false);
    br.bn_kx1 = make_bn<T>(prefix + ".bn_kx1", channels);
    b.branches.push_back(std::move(br));
  }
  const std::size_t hidden = channels * expansion;
  b.expand = make_conv<T>(name + ".expand", channels, hidden, ConvSpec{}, true);
  b.squeeze = make_conv<T>(name + ".squeeze", hidden, channels, ConvSpec{}, false);
  b.bn = make_bn<T>(name + ".bn", channels);
  return b;
}

template <typename T>
BasicTensor<T> block_forward(const BasicTensor<T>& x, Block<T>& block, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != block.channels) {
    throw std::invalid_argument(block.name + ": expected [N," + std::to_string(block.channels) +
                                ",H,W] input, got " + shape_to_string(x.shape()));
  }
  BasicTensor<T> mixed;
  for (auto& br : block.branches) {
    auto y = bn_relu(br.bn_1xk, br.dw_1xk.forward(x), mode);
    y = bn_relu(br.bn_kx1, br.dw_kx1.forward(y), mode);
    mixed = mixed.defined() ? add(mixed, y) : y;
  }
  auto h = relu(block.expand.forward(mixed));
  h = block.bn.forward(block.squeeze.forward(h), mode);
  return add(x, h);
}

template <typename T>
void init_block(Block<T>& block, std::mt19937_64& rng, InitScheme scheme) {
  for (auto& br : block.branches) {
    init_conv(br.dw_1xk, rng, scheme);
    init_bn(br.bn_1xk, T(1));
    init_conv(br.dw_kx1, rng, scheme);
    init_bn(br.bn_kx1, T(1));
  }
  init_conv(block.expand, rng, scheme);
  init_conv(block.squeeze, rng, scheme);
  init_bn(block.bn, T(0));
}

template <typename T>
BasicModel<T>::BasicModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t stem_out = config_.resolved_stem_out();
  const std::size_t kh = config_.stem_kernel_h, kw = config_.stem_kernel_w, s = config_.stem_stride;
  stem_.conv = make_conv<T>("stem.conv", config_.in_channels, stem_out, ConvSpec{kh, kw, s, s, kh / 2, kw / 2, 1},
                            false);
  stem_.bn = make_bn<T>("stem.bn", stem_out);
  std::size_t channels = stem_out;
  for (std::size_t i = 0; i < 4; ++i) {
    Stage<T> st;
    st.name = "stage" + std::to_string(i + 1);
    const std::size_t out = config_.stage_channels[i];
    // Stage 1 keeps the stem resolution; a projection is still needed when
    // the stem width differs from C1.
    if (i > 0 || channels != out) {
      const std::size_t stride = i > 0 ? config_.downsample_stride : 1;
      st.has_downsample = true;
      st.downsample = make_conv<T>(st.name + ".downsample.conv", channels, out,
                                   ConvSpec{1, 1, stride, stride, 0, 0, 1}, false);
      st.downsample_bn = make_bn<T>(st.name + ".downsample.bn", out);
    }
    for (std::size_t j = 0; j < config_.stage_depths[i]; ++j) {
      st.blocks.push_back(make_block<T>(st.name + ".block" + std::to_string(j + 1), out, config_.expansion,
                                        config_.branch_kernels));
    }
    stages_.push_back(std::move(st));
    channels = out;
  }
  head_.weight = BasicTensor<T>::zeros({config_.num_classes, channels}, true);
  head_.bias = BasicTensor<T>::zeros({config_.num_classes}, true);
}

template <typename T>
BasicTensor<T> BasicModel<T>::forward(const BasicTensor<T>& batch, Mode mode) {
  if (batch.rank() != 4 || batch.dim(1) != config_.in_channels) {
    throw std::invalid_argument("model input must be [N," + std::to_string(config_.in_channels) + ",T,F], got " +
                                shape_to_string(batch.shape()));
  }
  stage_extents(config_, batch.dim(2), batch.dim(3));
  auto x = relu(stem_.bn.forward(stem_.conv.forward(batch), mode));
  x = max_pool2d(x, stem_.pool);
  for (auto& st : stages_) {
    if (st.has_downsample) x = st.downsample_bn.forward(st.downsample.forward(x), mode);
    for (auto& b : st.blocks) x = block_forward(x, b, mode);
  }
  return linear(global_avg_pool(x), head_.weight, head_.bias);
}

template <typename T>
void BasicModel<T>::init_parameters(std::mt19937_64& rng, InitScheme scheme) {
  init_conv(stem_.conv, rng, scheme);
  init_bn(stem_.bn, T(1));
  for (auto& st : stages_) {
    if (st.has_downsample) {
      init_conv(st.downsample, rng, scheme);
      init_bn(st.downsample_bn, T(1));
    }
    for (auto& b : st.blocks) init_block(b, rng, scheme);
  }
  uniform_fill(head_.weight, init_bound(head_.weight.dim(1), scheme), rng);
  std::fill(head_.bias.mutable_data().begin(), head_.bias.mutable_data().end(), T(0));
}

template <typename T>
void BasicModel<T>::replace_head(std::size_t num_classes, std::mt19937_64& rng, InitScheme scheme) {
  if (num_classes < 1) throw std::invalid_argument("replace_head: num_classes must be >= 1");
  const std::size_t width = head_.weight.dim(1);
  head_.weight = BasicTensor<T>::zeros({num_classes, width}, true);
  head_.bias = BasicTensor<T>::zeros({num_classes}, true);
  uniform_fill(head_.weight, init_bound(width, scheme), rng);
  config_.num_classes = num_classes;
}

template <typename T>
void BasicModel<T>::set_bn_policy(BnPolicy policy) {
  for (auto* bn : mutable_batch_norms()) {
    bn->frozen = policy == BnPolicy::freeze_all_except_stem_first && bn != &stem_.bn;
  }
  bn_policy_ = policy;
}

template <typename T>
std::vector<BasicNamedTensor<T>> BasicModel<T>::named_parameters() const {
  std::vector<BasicNamedTensor<T>> out;
  push_conv(out, stem_.conv);
  push_bn(out, stem_.bn, false);
  for (const auto& st : stages_) {
    if (st.has_downsample) {
      push_conv(out, st.downsample);
      push_bn(out, st.downsample_bn, false);
    }
    for (const auto& b : st.blocks) {
      for (const auto& br : b.branches) {
        push_conv(out, br.dw_1xk);
        push_bn(out, br.bn_1xk, false);
        push_conv(out, br.dw_kx1);
        push_bn(out, br.bn_kx1, false);
      }
      push_conv(out, b.expand);
      push_conv(out, b.squeeze);
      push_bn(out, b.bn, false);
    }
  }
  out.push_back({"head.weight", head_.weight});
  out.push_back({"head.bias", head_.bias});
  return out;
}

template <typename T>
std::vector<BasicNamedTensor<T>> BasicModel<T>::trainable_parameters() const {
  std::vector<BasicNamedTensor<T>> out;
  for (auto& p : named_parameters()) {
    bool frozen = false;
    for (const auto* bn : batch_norms()) {
      if (bn->frozen && (p.tensor.same_storage(bn->gamma) || p.tensor.same_storage(bn->beta))) frozen = true;
    }
    if (!frozen) out.push_back(std::move(p));
  }
  return out;
}

template <typename T>
std::vector<BasicNamedTensor<T>> BasicModel<T>::named_buffers() const {
  std::vector<BasicNamedTensor<T>> out;
  for (const auto* bn : batch_norms()) {
    out.push_back({bn->name + ".running_mean", bn->running_mean});
    out.push_back({bn->name + ".running_var", bn->running_var});
  }
  return out;
}

template <typename T>
std::vector<BasicNamedTensor<T>> BasicModel<T>::state() const {
  auto out = named_parameters();
  for (auto& b : named_buffers()) out.push_back(std::move(b));
  return out;
}

template <typename T>
std::vector<const BatchNormLayer<T>*> BasicModel<T>::batch_norms() const {
  std::vector<const BatchNormLayer<T>*> out;
  for (auto* bn : const_cast<BasicModel*>(this)->mutable_batch_norms()) out.push_back(bn);
  return out;
}

template <typename T>
std::vector<BatchNormLayer<T>*> BasicModel<T>::mutable_batch_norms() {
  std::vector<BatchNormLayer<T>*> out{&stem_.bn};
  for (auto& st : stages_) {
    if (st.has_downsample) out.push_back(&st.downsample_bn);
    for (auto& b : st.blocks) {
      for (auto& br : b.branches) {
        out.push_back(&br.bn_1xk);
        out.push_back(&br.bn_kx1);
      }
      out.push_back(&b.bn);
    }
  }
  return out;
}

template <typename T>
std::size_t BasicModel<T>::trainable_batch_norm_count() const {
  std::size_t n = 0;
  for (const auto* bn : batch_norms()) n += bn->frozen ? 0 : 1;
  return n;
}

template <typename T>
void BasicModel<T>::zero_grad() {
  for (auto& p : named_parameters()) p.tensor.zero_grad();
}

#define AINX_MODEL_INSTANTIATE(T)                                                                          \
  template struct BatchNormLayer<T>;                                                                       \
  template class BasicModel<T>;                                                                            \
  template Block<T> make_block<T>(const std::string&, std::size_t, std::size_t, const std::vector<std::size_t>&); \
  template BasicTensor<T> block_forward<T>(const BasicTensor<T>&, Block<T>&, Mode);                       \
  template void init_block<T>(Block<T>&, std::mt19937_64&, InitScheme);

AINX_MODEL_INSTANTIATE(float)
AINX_MODEL_INSTANTIATE(double)
#undef AINX_MODEL_INSTANTIATE

}  // namespace ainx::model
