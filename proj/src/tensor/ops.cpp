#include "ainx/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace ainx {

namespace {

using index_t = std::ptrdiff_t;
constexpr index_t kParallelThreshold = 1 << 14;

template <typename T>
bool wants_grad(const BasicTensor<T>& t) {
  return t.defined() && t.requires_grad();
}

template <typename T>
void check_finite(const std::vector<T>& data, const char* op) {
#ifndef NDEBUG
  for (const T v : data) {
    if (!std::isfinite(v)) throw std::domain_error(std::string(op) + " produced a non-finite value");
  }
#else
  (void)data;
  (void)op;
#endif
}

// Wraps freshly computed data as an op output and, when any input needs a
// gradient, records the backward closure.
template <typename T>
BasicTensor<T> make_output(Shape shape, std::vector<T> data, const char* op,
                           std::initializer_list<const BasicTensor<T>*> inputs,
                           std::function<void(std::span<const T>)> backward_fn) {
  check_finite(data, op);
  auto out = BasicTensor<T>::from_data(std::move(shape), std::move(data));
  if (!NoGradGuard::grad_enabled()) return out;
  auto node = std::make_shared<detail::Node<T>>();
  for (const auto* in : inputs) {
    if (wants_grad(*in)) node->inputs.push_back(in->impl());
  }
  if (node->inputs.empty()) return out;
  node->op = op;
  node->backward = std::move(backward_fn);
  out.impl()->requires_grad = true;
  out.impl()->grad_fn = std::move(node);
  return out;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const ConvSpec& spec) {
  const auto g = kernels::ConvGeometry::make(input.shape(), weight.shape(), spec);
  if (bias.defined()) {
    require(bias.rank() == 1 && bias.dim(0) == g.out_channels,
            "conv2d: bias must have shape [" + std::to_string(g.out_channels) + "], got " +
                shape_to_string(bias.shape()));
  }
  std::vector<T> out(g.output_size());
  kernels::conv2d_forward<T>(g, input.data(), weight.data(),
                             bias.defined() ? bias.data() : std::span<const T>{}, out);
  auto in_impl = input.impl();
  auto w_impl = weight.impl();
  auto b_impl = bias.defined() ? bias.impl() : nullptr;
  return make_output<T>({g.batch, g.out_channels, g.out_h, g.out_w}, std::move(out), "conv2d",
                        {&input, &weight, &bias}, [g, in_impl, w_impl, b_impl](std::span<const T> dy) {
                          if (in_impl->requires_grad) {
                            kernels::conv2d_backward_input<T>(g, dy, w_impl->data,
                                                              detail::grad_buffer(*in_impl));
                          }
                          if (w_impl->requires_grad) {
                            kernels::conv2d_backward_weight<T>(g, dy, in_impl->data,
                                                               detail::grad_buffer(*w_impl));
                          }
                          if (b_impl && b_impl->requires_grad) {
                            kernels::conv2d_backward_bias<T>(g, dy, detail::grad_buffer(*b_impl));
                          }
                        });
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& input, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                          BasicTensor<T>& running_var, const BatchNormOptions& options) {
  require(options.eps > 0, "batch_norm: eps must be positive");
  require(input.rank() == 4, "batch_norm: input must be 4-D, got " + shape_to_string(input.shape()));
  const index_t N = input.dim(0), C = input.dim(1), P = input.dim(2) * input.dim(3);
  for (const BasicTensor<T>* t : {&gamma, &beta, static_cast<const BasicTensor<T>*>(&running_mean),
                                  static_cast<const BasicTensor<T>*>(&running_var)}) {
    require(t->rank() == 1 && static_cast<index_t>(t->dim(0)) == C,
            "batch_norm: per-channel tensor has shape " + shape_to_string(t->shape()) +
                ", expected [" + std::to_string(C) + "]");
  }
  const index_t M = N * P;
  const T* x = input.data().data();
  const T* gm = gamma.data().data();
  const T* bt = beta.data().data();
  std::vector<T> out(input.numel());
  auto shift = std::make_shared<std::vector<T>>(C);   // mean subtracted per channel
  auto invstd = std::make_shared<std::vector<T>>(C);  // 1/sqrt(var + eps)
  const bool train = options.mode == BnMode::train;

  if (train) {
    T* rm = running_mean.mutable_data().data();
    T* rv = running_var.mutable_data().data();
#pragma omp parallel for schedule(static)
    for (index_t c = 0; c < C; ++c) {
      double s = 0;
      for (index_t n = 0; n < N; ++n) {
        const T* xc = x + (n * C + c) * P;
        for (index_t p = 0; p < P; ++p) s += xc[p];
      }
      const double mean = s / M;
      double ss = 0;
      for (index_t n = 0; n < N; ++n) {
        const T* xc = x + (n * C + c) * P;
        for (index_t p = 0; p < P; ++p) {
          const double d = xc[p] - mean;
          ss += d * d;
        }
      }
      const double var = ss / M;
      (*shift)[c] = T(mean);
      (*invstd)[c] = T(1.0 / std::sqrt(var + options.eps));
      const double unbiased = M > 1 ? ss / (M - 1) : var;
      rm[c] = T((1 - options.momentum) * rm[c] + options.momentum * mean);
      rv[c] = T((1 - options.momentum) * rv[c] + options.momentum * unbiased);
    }
  } else {
    for (index_t c = 0; c < C; ++c) {
      (*shift)[c] = running_mean.data()[c];
      (*invstd)[c] = T(1.0 / std::sqrt(double(running_var.data()[c]) + options.eps));
    }
  }

#pragma omp parallel for collapse(2) schedule(static) if (N * C * P > kParallelThreshold)
  for (index_t n = 0; n < N; ++n) {
    for (index_t c = 0; c < C; ++c) {
      const T* xc = x + (n * C + c) * P;
      T* yc = out.data() + (n * C + c) * P;
      const T scale = gm[c] * (*invstd)[c];
      const T mean = (*shift)[c];
      // Centering first avoids cancellation against a large folded offset.
      for (index_t p = 0; p < P; ++p) yc[p] = scale * (xc[p] - mean) + bt[c];
    }
  }

  auto in_impl = input.impl();
  auto g_impl = gamma.impl();
  auto b_impl = beta.impl();
  const BnMode mode = options.mode;
  const bool affine_grad = mode != BnMode::frozen;
  const BasicTensor<T> none;
  return make_output<T>(
      input.shape(), std::move(out), "batch_norm",
      {&input, affine_grad ? &gamma : &none, affine_grad ? &beta : &none},
      [=](std::span<const T> dy) {
        const T* xv = in_impl->data.data();
        const T* gv = g_impl->data.data();
        T* dgamma = affine_grad && g_impl->requires_grad ? detail::grad_buffer(*g_impl).data() : nullptr;
        T* dbeta = affine_grad && b_impl->requires_grad ? detail::grad_buffer(*b_impl).data() : nullptr;
        T* dx = in_impl->requires_grad ? detail::grad_buffer(*in_impl).data() : nullptr;
#pragma omp parallel for schedule(static)
        for (index_t c = 0; c < C; ++c) {
          const T mu = (*shift)[c], is = (*invstd)[c];
          double sum_dy = 0, sum_dy_xhat = 0;
          for (index_t n = 0; n < N; ++n) {
            const T* xc = xv + (n * C + c) * P;
            const T* dc = dy.data() + (n * C + c) * P;
            for (index_t p = 0; p < P; ++p) {
              sum_dy += dc[p];
              sum_dy_xhat += double(dc[p]) * (xc[p] - mu) * is;
            }
          }
          if (dgamma) dgamma[c] += T(sum_dy_xhat);
          if (dbeta) dbeta[c] += T(sum_dy);
          if (!dx) continue;
          const T k = gv[c] * is;
          if (mode == BnMode::train) {
            const T mean_dy = T(sum_dy / M), mean_dy_xhat = T(sum_dy_xhat / M);
            for (index_t n = 0; n < N; ++n) {
              const T* xc = xv + (n * C + c) * P;
              const T* dc = dy.data() + (n * C + c) * P;
              T* dxc = dx + (n * C + c) * P;
              for (index_t p = 0; p < P; ++p) {
                const T xhat = (xc[p] - mu) * is;
                dxc[p] += k * (dc[p] - mean_dy - xhat * mean_dy_xhat);
              }
            }
          } else {
            for (index_t n = 0; n < N; ++n) {
              const T* dc = dy.data() + (n * C + c) * P;
              T* dxc = dx + (n * C + c) * P;
              for (index_t p = 0; p < P; ++p) dxc[p] += k * dc[p];
            }
          }
        }
      });
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input) {
  const index_t n = input.numel();
  const T* x = input.data().data();
  std::vector<T> out(n);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (index_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  auto in_impl = input.impl();
  return make_output<T>(input.shape(), std::move(out), "relu", {&input}, [in_impl](std::span<const T> dy) {
    const index_t n = in_impl->data.size();
    const T* xv = in_impl->data.data();
    T* dx = detail::grad_buffer(*in_impl).data();
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
    for (index_t i = 0; i < n; ++i) {
      if (xv[i] > T(0)) dx[i] += dy[i];
    }
  });
}

template <typename T>
BasicTensor<T> max_pool2d(const BasicTensor<T>& input, const PoolSpec& spec) {
  const auto g = kernels::PoolGeometry::make(input.shape(), spec);
  std::vector<T> out(g.output_size());
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(g.output_size());
  kernels::max_pool2d_forward<T>(g, input.data(), out, *argmax);
  auto in_impl = input.impl();
  return make_output<T>({g.batch, g.channels, g.out_h, g.out_w}, std::move(out), "max_pool2d", {&input},
                        [g, in_impl, argmax](std::span<const T> dy) {
                          kernels::max_pool2d_backward<T>(g, dy, *argmax, detail::grad_buffer(*in_impl));
                        });
}

template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& input) {
  require(input.rank() == 4, "global_avg_pool: input must be 4-D, got " + shape_to_string(input.shape()));
  const index_t NC = input.dim(0) * input.dim(1), P = input.dim(2) * input.dim(3);
  const T* x = input.data().data();
  std::vector<T> out(NC);
  for (index_t i = 0; i < NC; ++i) {
    double s = 0;
    for (index_t p = 0; p < P; ++p) s += x[i * P + p];
    out[i] = T(s / P);
  }
  auto in_impl = input.impl();
  return make_output<T>({input.dim(0), input.dim(1)}, std::move(out), "global_avg_pool", {&input},
                        [in_impl, NC, P](std::span<const T> dy) {
                          T* dx = detail::grad_buffer(*in_impl).data();
                          for (index_t i = 0; i < NC; ++i) {
                            const T d = dy[i] / T(P);
                            for (index_t p = 0; p < P; ++p) dx[i * P + p] += d;
                          }
                        });
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  require(input.rank() == 2, "linear: input must be 2-D [N,Din], got " + shape_to_string(input.shape()));
  require(weight.rank() == 2, "linear: weight must be 2-D [Dout,Din], got " + shape_to_string(weight.shape()));
  const index_t N = input.dim(0), Din = input.dim(1), Dout = weight.dim(0);
  require(static_cast<index_t>(weight.dim(1)) == Din,
          "linear: weight Din " + std::to_string(weight.dim(1)) + " != input Din " + std::to_string(Din));
  if (bias.defined()) {
    require(bias.rank() == 1 && static_cast<index_t>(bias.dim(0)) == Dout,
            "linear: bias must have shape [" + std::to_string(Dout) + "], got " +
                shape_to_string(bias.shape()));
  }
  const T* x = input.data().data();
  const T* w = weight.data().data();
  std::vector<T> out(N * Dout);
  for (index_t n = 0; n < N; ++n) {
    for (index_t o = 0; o < Dout; ++o) {
      T acc = bias.defined() ? bias.data()[o] : T(0);
      for (index_t i = 0; i < Din; ++i) acc += x[n * Din + i] * w[o * Din + i];
      out[n * Dout + o] = acc;
    }
  }
  auto in_impl = input.impl();
  auto w_impl = weight.impl();
  auto b_impl = bias.defined() ? bias.impl() : nullptr;
  return make_output<T>({static_cast<std::size_t>(N), static_cast<std::size_t>(Dout)}, std::move(out),
                        "linear", {&input, &weight, &bias},
                        [=](std::span<const T> dy) {
                          if (in_impl->requires_grad) {
                            T* dx = detail::grad_buffer(*in_impl).data();
                            const T* wv = w_impl->data.data();
                            for (index_t n = 0; n < N; ++n)
                              for (index_t o = 0; o < Dout; ++o) {
                                const T d = dy[n * Dout + o];
                                for (index_t i = 0; i < Din; ++i) dx[n * Din + i] += d * wv[o * Din + i];
                              }
                          }
                          if (w_impl->requires_grad) {
                            T* dw = detail::grad_buffer(*w_impl).data();
                            const T* xv = in_impl->data.data();
                            for (index_t o = 0; o < Dout; ++o)
                              for (index_t n = 0; n < N; ++n) {
                                const T d = dy[n * Dout + o];
                                for (index_t i = 0; i < Din; ++i) dw[o * Din + i] += d * xv[n * Din + i];
                              }
                          }
                          if (b_impl && b_impl->requires_grad) {
                            T* db = detail::grad_buffer(*b_impl).data();
                            for (index_t n = 0; n < N; ++n)
                              for (index_t o = 0; o < Dout; ++o) db[o] += dy[n * Dout + o];
                          }
                        });
}

template <typename T>
BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                     std::span<const std::int32_t> labels) {
  require(logits.rank() == 2, "softmax_cross_entropy: logits must be 2-D [N,K], got " +
                                  shape_to_string(logits.shape()));
  const index_t N = logits.dim(0), K = logits.dim(1);
  require(static_cast<index_t>(labels.size()) == N,
          "softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
              std::to_string(N));
  for (index_t n = 0; n < N; ++n) {
    require(labels[n] >= 0 && labels[n] < K, "softmax_cross_entropy: label " + std::to_string(labels[n]) +
                                                 " at row " + std::to_string(n) + " outside [0," +
                                                 std::to_string(K) + ")");
  }
  const T* z = logits.data().data();
  auto probs = std::make_shared<std::vector<T>>(N * K);
  double loss = 0;
  for (index_t n = 0; n < N; ++n) {
    const T* row = z + n * K;
    const T mx = *std::max_element(row, row + K);
    double denom = 0;
    for (index_t k = 0; k < K; ++k) denom += std::exp(double(row[k] - mx));
    for (index_t k = 0; k < K; ++k) (*probs)[n * K + k] = T(std::exp(double(row[k] - mx)) / denom);
    loss += std::log(denom) - double(row[labels[n]] - mx);
  }
  loss /= N;
  std::vector<std::int32_t> label_copy(labels.begin(), labels.end());
  auto in_impl = logits.impl();
  return make_output<T>({1}, {T(loss)}, "softmax_cross_entropy", {&logits},
                        [=](std::span<const T> dy) {
                          T* dz = detail::grad_buffer(*in_impl).data();
                          const T scale = dy[0] / T(N);
                          for (index_t n = 0; n < N; ++n)
                            for (index_t k = 0; k < K; ++k) {
                              const T onehot = k == label_copy[n] ? T(1) : T(0);
                              dz[n * K + k] += scale * ((*probs)[n * K + k] - onehot);
                            }
                        });
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  const index_t n = a.numel();
  const T* x = a.data().data();
  const T* y = b.data().data();
  std::vector<T> out(n);
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
  for (index_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
  auto a_impl = a.impl();
  auto b_impl = b.impl();
  return make_output<T>(a.shape(), std::move(out), "add", {&a, &b}, [a_impl, b_impl](std::span<const T> dy) {
    for (const auto& impl : {a_impl, b_impl}) {
      if (!impl->requires_grad) continue;
      T* d = detail::grad_buffer(*impl).data();
      const index_t n = dy.size();
#pragma omp parallel for schedule(static) if (n > kParallelThreshold)
      for (index_t i = 0; i < n; ++i) d[i] += dy[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
  const index_t n = a.numel();
  std::vector<T> out(n);
  for (index_t i = 0; i < n; ++i) out[i] = a.data()[i] * b.data()[i];
  auto a_impl = a.impl();
  auto b_impl = b.impl();
  return make_output<T>(a.shape(), std::move(out), "mul", {&a, &b}, [a_impl, b_impl](std::span<const T> dy) {
    const index_t n = dy.size();
    if (a_impl->requires_grad) {
      T* d = detail::grad_buffer(*a_impl).data();
      for (index_t i = 0; i < n; ++i) d[i] += dy[i] * b_impl->data[i];
    }
    if (b_impl->requires_grad) {
      T* d = detail::grad_buffer(*b_impl).data();
      for (index_t i = 0; i < n; ++i) d[i] += dy[i] * a_impl->data[i];
    }
  });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& input) {
  double s = 0;
  for (const T v : input.data()) s += v;
  auto in_impl = input.impl();
  return make_output<T>({1}, {T(s)}, "sum", {&input}, [in_impl](std::span<const T> dy) {
    for (auto& d : detail::grad_buffer(*in_impl)) d += dy[0];
  });
}

#define AINX_OPS_INSTANTIATE(T)                                                                         \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,  \
                                 const ConvSpec&);                                                     \
  template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                     const BasicTensor<T>&, BasicTensor<T>&, BasicTensor<T>&,          \
                                     const BatchNormOptions&);                                         \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                                 \
  template BasicTensor<T> max_pool2d(const BasicTensor<T>&, const PoolSpec&);                          \
  template BasicTensor<T> global_avg_pool(const BasicTensor<T>&);                                      \
  template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> softmax_cross_entropy(const BasicTensor<T>&, std::span<const std::int32_t>); \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template BasicTensor<T> sum(const BasicTensor<T>&);

AINX_OPS_INSTANTIATE(float)
AINX_OPS_INSTANTIATE(double)
#undef AINX_OPS_INSTANTIATE

}  // namespace ainx
