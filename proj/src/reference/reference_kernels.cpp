#include "reference_kernels.hpp"

#include <limits>

namespace ainx::reference {

namespace {
using index_t = long long;
}

template <typename T>
void conv2d_forward(const kernels::ConvGeometry& g, std::span<const T> input,
                    std::span<const T> weight, std::span<const T> bias, std::span<T> output) {
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const auto& s = g.spec;
  for (index_t n = 0; n < (index_t)g.batch; ++n)
    for (index_t co = 0; co < (index_t)g.out_channels; ++co)
      for (index_t oy = 0; oy < (index_t)g.out_h; ++oy)
        for (index_t ox = 0; ox < (index_t)g.out_w; ++ox) {
          double acc = bias.empty() ? 0.0 : double(bias[co]);
          const index_t group = co / cout_g;
          for (index_t cl = 0; cl < cin_g; ++cl) {
            const index_t ci = group * cin_g + cl;
            for (index_t ky = 0; ky < (index_t)s.kernel_h; ++ky)
              for (index_t kx = 0; kx < (index_t)s.kernel_w; ++kx) {
                const index_t iy = oy * s.stride_h + ky - s.pad_h;
                const index_t ix = ox * s.stride_w + kx - s.pad_w;
                if (iy < 0 || ix < 0 || iy >= (index_t)g.in_h || ix >= (index_t)g.in_w) continue;
                const double xv = input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
                const double wv = weight[((co * cin_g + cl) * s.kernel_h + ky) * s.kernel_w + kx];
                acc += xv * wv;
              }
          }
          output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = T(acc);
        }
}

template <typename T>
void conv2d_backward_input(const kernels::ConvGeometry& g, std::span<const T> grad_output,
                           std::span<const T> weight, std::span<T> grad_input) {
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const auto& s = g.spec;
  for (index_t n = 0; n < (index_t)g.batch; ++n)
    for (index_t co = 0; co < (index_t)g.out_channels; ++co)
      for (index_t oy = 0; oy < (index_t)g.out_h; ++oy)
        for (index_t ox = 0; ox < (index_t)g.out_w; ++ox) {
          const T d = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          const index_t group = co / cout_g;
          for (index_t cl = 0; cl < cin_g; ++cl)
            for (index_t ky = 0; ky < (index_t)s.kernel_h; ++ky)
              for (index_t kx = 0; kx < (index_t)s.kernel_w; ++kx) {
                const index_t iy = oy * s.stride_h + ky - s.pad_h;
                const index_t ix = ox * s.stride_w + kx - s.pad_w;
                if (iy < 0 || ix < 0 || iy >= (index_t)g.in_h || ix >= (index_t)g.in_w) continue;
                const index_t ci = group * cin_g + cl;
                grad_input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] +=
                    d * weight[((co * cin_g + cl) * s.kernel_h + ky) * s.kernel_w + kx];
              }
        }
}

template <typename T>
void conv2d_backward_weight(const kernels::ConvGeometry& g, std::span<const T> grad_output,
                            std::span<const T> input, std::span<T> grad_weight) {
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const auto& s = g.spec;
  for (index_t n = 0; n < (index_t)g.batch; ++n)
    for (index_t co = 0; co < (index_t)g.out_channels; ++co)
      for (index_t oy = 0; oy < (index_t)g.out_h; ++oy)
        for (index_t ox = 0; ox < (index_t)g.out_w; ++ox) {
          const T d = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          const index_t group = co / cout_g;
          for (index_t cl = 0; cl < cin_g; ++cl)
            for (index_t ky = 0; ky < (index_t)s.kernel_h; ++ky)
              for (index_t kx = 0; kx < (index_t)s.kernel_w; ++kx) {
                const index_t iy = oy * s.stride_h + ky - s.pad_h;
                const index_t ix = ox * s.stride_w + kx - s.pad_w;
                if (iy < 0 || ix < 0 || iy >= (index_t)g.in_h || ix >= (index_t)g.in_w) continue;
                const index_t ci = group * cin_g + cl;
                grad_weight[((co * cin_g + cl) * s.kernel_h + ky) * s.kernel_w + kx] +=
                    d * input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
        }
}

template <typename T>
void max_pool2d_forward(const kernels::PoolGeometry& g, std::span<const T> input,
                        std::span<T> output) {
  const auto& s = g.spec;
  for (index_t p = 0; p < (index_t)(g.batch * g.channels); ++p)
    for (index_t oy = 0; oy < (index_t)g.out_h; ++oy)
      for (index_t ox = 0; ox < (index_t)g.out_w; ++ox) {
        T best = -std::numeric_limits<T>::infinity();
        for (index_t ky = 0; ky < (index_t)s.kernel_h; ++ky)
          for (index_t kx = 0; kx < (index_t)s.kernel_w; ++kx) {
            const index_t iy = oy * s.stride_h + ky - s.pad_h;
            const index_t ix = ox * s.stride_w + kx - s.pad_w;
            if (iy < 0 || ix < 0 || iy >= (index_t)g.in_h || ix >= (index_t)g.in_w) continue;
            const T v = input[(p * g.in_h + iy) * g.in_w + ix];
            if (v > best) best = v;
          }
        output[(p * g.out_h + oy) * g.out_w + ox] = best;
      }
}

#define AINX_REF_INSTANTIATE(T)                                                                  \
  template void conv2d_forward<T>(const kernels::ConvGeometry&, std::span<const T>,             \
                                  std::span<const T>, std::span<const T>, std::span<T>);        \
  template void conv2d_backward_input<T>(const kernels::ConvGeometry&, std::span<const T>,      \
                                         std::span<const T>, std::span<T>);                     \
  template void conv2d_backward_weight<T>(const kernels::ConvGeometry&, std::span<const T>,     \
                                          std::span<const T>, std::span<T>);                    \
  template void max_pool2d_forward<T>(const kernels::PoolGeometry&, std::span<const T>,         \
                                      std::span<T>);

AINX_REF_INSTANTIATE(float)
AINX_REF_INSTANTIATE(double)
#undef AINX_REF_INSTANTIATE

}  // namespace ainx::reference
