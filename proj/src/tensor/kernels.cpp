#include "ainx/kernels.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace ainx {

using index_t = std::ptrdiff_t;

ConvSpec ConvSpec::same(std::size_t kernel_h, std::size_t kernel_w, std::size_t groups) {
  ConvSpec spec;
  spec.kernel_h = kernel_h;
  spec.kernel_w = kernel_w;
  spec.pad_h = (kernel_h - 1) / 2;
  spec.pad_w = (kernel_w - 1) / 2;
  spec.groups = groups;
  return spec;
}

std::size_t output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || in + 2 * pad < kernel) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace kernels {
namespace {

[[noreturn]] void bad(const std::string& what) { throw std::invalid_argument(what); }

// Output positions o with o*stride + tap - pad inside [0, in).
struct TapRange {
  index_t lo = 0;
  index_t hi = 0;  // exclusive
  index_t first_in = 0;
};

TapRange tap_range(index_t in, index_t out, index_t stride, index_t tap, index_t pad) {
  TapRange r;
  index_t offset = tap - pad;
  r.lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
  index_t last = in - 1 - offset;
  r.hi = last < 0 ? 0 : std::min(out, last / stride + 1);
  if (r.hi < r.lo) r.hi = r.lo;
  r.first_in = r.lo * stride + offset;
  return r;
}

bool is_pointwise(const ConvGeometry& g) {
  const auto& s = g.spec;
  return s.kernel_h == 1 && s.kernel_w == 1 && s.stride_h == 1 && s.stride_w == 1 &&
         s.pad_h == 0 && s.pad_w == 0;
}

}  // namespace

ConvGeometry ConvGeometry::make(const Shape& input, const Shape& weight, const ConvSpec& spec) {
  if (input.size() != 4) bad("conv2d: input must be 4-D (N,C,H,W), got " + shape_to_string(input));
  if (weight.size() != 4) bad("conv2d: weight must be 4-D, got " + shape_to_string(weight));
  if (spec.groups == 0) bad("conv2d: groups must be positive");
  if (spec.stride_h == 0 || spec.stride_w == 0) bad("conv2d: stride must be positive");
  ConvGeometry g;
  g.batch = input[0];
  g.in_channels = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.out_channels = weight[0];
  g.spec = spec;
  if (g.in_channels % spec.groups != 0) {
    bad("conv2d: input channels " + std::to_string(g.in_channels) + " not divisible by groups " +
        std::to_string(spec.groups));
  }
  if (g.out_channels % spec.groups != 0) {
    bad("conv2d: output channels " + std::to_string(g.out_channels) +
        " not divisible by groups " + std::to_string(spec.groups));
  }
  if (weight[1] != g.in_channels / spec.groups) {
    bad("conv2d: weight dim 1 is " + std::to_string(weight[1]) + ", expected in_channels/groups = " +
        std::to_string(g.in_channels / spec.groups));
  }
  if (weight[2] != spec.kernel_h) {
    bad("conv2d: weight kernel height " + std::to_string(weight[2]) + " != spec kernel_h " +
        std::to_string(spec.kernel_h));
  }
  if (weight[3] != spec.kernel_w) {
    bad("conv2d: weight kernel width " + std::to_string(weight[3]) + " != spec kernel_w " +
        std::to_string(spec.kernel_w));
  }
  g.out_h = output_extent(g.in_h, spec.kernel_h, spec.stride_h, spec.pad_h);
  g.out_w = output_extent(g.in_w, spec.kernel_w, spec.stride_w, spec.pad_w);
  if (g.out_h == 0) bad("conv2d: output height is zero for input height " + std::to_string(g.in_h));
  if (g.out_w == 0) bad("conv2d: output width is zero for input width " + std::to_string(g.in_w));
  return g;
}

PoolGeometry PoolGeometry::make(const Shape& input, const PoolSpec& spec) {
  if (input.size() != 4) bad("max_pool2d: input must be 4-D, got " + shape_to_string(input));
  if (spec.stride_h == 0 || spec.stride_w == 0) bad("max_pool2d: stride must be positive");
  if (spec.pad_h >= spec.kernel_h || spec.pad_w >= spec.kernel_w) {
    bad("max_pool2d: padding must be smaller than the kernel");
  }
  PoolGeometry g;
  g.batch = input[0];
  g.channels = input[1];
  g.in_h = input[2];
  g.in_w = input[3];
  g.spec = spec;
  g.out_h = output_extent(g.in_h, spec.kernel_h, spec.stride_h, spec.pad_h);
  g.out_w = output_extent(g.in_w, spec.kernel_w, spec.stride_w, spec.pad_w);
  if (g.out_h == 0) bad("max_pool2d: output height is zero for input height " + std::to_string(g.in_h));
  if (g.out_w == 0) bad("max_pool2d: output width is zero for input width " + std::to_string(g.in_w));
  return g;
}

template <typename T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const index_t N = g.batch, Cin = g.in_channels, Cout = g.out_channels;
  const index_t H = g.in_h, W = g.in_w, OH = g.out_h, OW = g.out_w;
  const index_t KH = g.spec.kernel_h, KW = g.spec.kernel_w;
  const index_t SH = g.spec.stride_h, SW = g.spec.stride_w;
  const index_t PH = g.spec.pad_h, PW = g.spec.pad_w;
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const T* x = input.data();
  const T* w = weight.data();
  T* y = output.data();
  const bool pointwise = is_pointwise(g);
  const bool has_bias = !bias.empty();

#pragma omp parallel for collapse(2) schedule(static)
  for (index_t n = 0; n < N; ++n) {
    for (index_t co = 0; co < Cout; ++co) {
      T* out = y + (n * Cout + co) * OH * OW;
      std::fill(out, out + OH * OW, has_bias ? bias[co] : T(0));
      const index_t group = co / cout_g;
      const T* wk = w + co * cin_g * KH * KW;
      const T* xg = x + (n * Cin + group * cin_g) * H * W;
      if (pointwise) {
        const index_t P = H * W;
        index_t c = 0;
        for (; c + 4 <= cin_g; c += 4) {
          const T w0 = wk[c], w1 = wk[c + 1], w2 = wk[c + 2], w3 = wk[c + 3];
          const T* x0 = xg + c * P;
          const T* x1 = x0 + P;
          const T* x2 = x1 + P;
          const T* x3 = x2 + P;
          for (index_t p = 0; p < P; ++p) out[p] += w0 * x0[p] + w1 * x1[p] + w2 * x2[p] + w3 * x3[p];
        }
        for (; c < cin_g; ++c) {
          const T wc = wk[c];
          const T* xc = xg + c * P;
          for (index_t p = 0; p < P; ++p) out[p] += wc * xc[p];
        }
        continue;
      }
      for (index_t c = 0; c < cin_g; ++c) {
        const T* xc = xg + c * H * W;
        for (index_t ky = 0; ky < KH; ++ky) {
          const TapRange rows = tap_range(H, OH, SH, ky, PH);
          for (index_t kx = 0; kx < KW; ++kx) {
            const TapRange cols = tap_range(W, OW, SW, kx, PW);
            const index_t len = cols.hi - cols.lo;
            if (len <= 0) continue;
            const T wv = wk[(c * KH + ky) * KW + kx];
            for (index_t oy = rows.lo; oy < rows.hi; ++oy) {
              const index_t iy = oy * SH + ky - PH;
              const T* xr = xc + iy * W + cols.first_in;
              T* yr = out + oy * OW + cols.lo;
              if (SW == 1) {
                for (index_t i = 0; i < len; ++i) yr[i] += wv * xr[i];
              } else {
                for (index_t i = 0; i < len; ++i) yr[i] += wv * xr[i * SW];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output,
                           std::span<const T> weight, std::span<T> grad_input) {
  const index_t N = g.batch, Cin = g.in_channels, Cout = g.out_channels;
  const index_t H = g.in_h, W = g.in_w, OH = g.out_h, OW = g.out_w;
  const index_t KH = g.spec.kernel_h, KW = g.spec.kernel_w;
  const index_t SH = g.spec.stride_h, SW = g.spec.stride_w;
  const index_t PH = g.spec.pad_h, PW = g.spec.pad_w;
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const T* dy = grad_output.data();
  const T* w = weight.data();
  T* dx = grad_input.data();
  const bool pointwise = is_pointwise(g);

#pragma omp parallel for collapse(2) schedule(static)
  for (index_t n = 0; n < N; ++n) {
    for (index_t ci = 0; ci < Cin; ++ci) {
      T* dxc = dx + (n * Cin + ci) * H * W;
      const index_t group = ci / cin_g;
      const index_t cl = ci % cin_g;
      const T* dyg = dy + (n * Cout + group * cout_g) * OH * OW;
      if (pointwise) {
        const index_t P = H * W;
        index_t o = 0;
        for (; o + 4 <= cout_g; o += 4) {
          const index_t co = group * cout_g + o;
          const T w0 = w[co * cin_g + cl], w1 = w[(co + 1) * cin_g + cl];
          const T w2 = w[(co + 2) * cin_g + cl], w3 = w[(co + 3) * cin_g + cl];
          const T* d0 = dyg + o * P;
          const T* d1 = d0 + P;
          const T* d2 = d1 + P;
          const T* d3 = d2 + P;
          for (index_t p = 0; p < P; ++p) dxc[p] += w0 * d0[p] + w1 * d1[p] + w2 * d2[p] + w3 * d3[p];
        }
        for (; o < cout_g; ++o) {
          const index_t co = group * cout_g + o;
          const T wc = w[co * cin_g + cl];
          const T* d = dyg + o * P;
          for (index_t p = 0; p < P; ++p) dxc[p] += wc * d[p];
        }
        continue;
      }
      for (index_t o = 0; o < cout_g; ++o) {
        const index_t co = group * cout_g + o;
        const T* dyc = dyg + o * OH * OW;
        const T* wk = w + (co * cin_g + cl) * KH * KW;
        for (index_t ky = 0; ky < KH; ++ky) {
          const TapRange rows = tap_range(H, OH, SH, ky, PH);
          for (index_t kx = 0; kx < KW; ++kx) {
            const TapRange cols = tap_range(W, OW, SW, kx, PW);
            const index_t len = cols.hi - cols.lo;
            if (len <= 0) continue;
            const T wv = wk[ky * KW + kx];
            for (index_t oy = rows.lo; oy < rows.hi; ++oy) {
              const index_t iy = oy * SH + ky - PH;
              T* xr = dxc + iy * W + cols.first_in;
              const T* dr = dyc + oy * OW + cols.lo;
              if (SW == 1) {
                for (index_t i = 0; i < len; ++i) xr[i] += wv * dr[i];
              } else {
                for (index_t i = 0; i < len; ++i) xr[i * SW] += wv * dr[i];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const ConvGeometry& g, std::span<const T> grad_output,
                            std::span<const T> input, std::span<T> grad_weight) {
  const index_t N = g.batch, Cin = g.in_channels, Cout = g.out_channels;
  const index_t H = g.in_h, W = g.in_w, OH = g.out_h, OW = g.out_w;
  const index_t KH = g.spec.kernel_h, KW = g.spec.kernel_w;
  const index_t SH = g.spec.stride_h, SW = g.spec.stride_w;
  const index_t PH = g.spec.pad_h, PW = g.spec.pad_w;
  const index_t cin_g = g.in_per_group(), cout_g = g.out_per_group();
  const T* dy = grad_output.data();
  const T* x = input.data();
  T* dw = grad_weight.data();
  const bool pointwise = is_pointwise(g);

#pragma omp parallel for collapse(2) schedule(static)
  for (index_t co = 0; co < Cout; ++co) {
    for (index_t cl = 0; cl < cin_g; ++cl) {
      const index_t ci = (co / cout_g) * cin_g + cl;
      T* dwk = dw + (co * cin_g + cl) * KH * KW;
      for (index_t n = 0; n < N; ++n) {
        const T* dyc = dy + (n * Cout + co) * OH * OW;
        const T* xc = x + (n * Cin + ci) * H * W;
        if (pointwise) {
          T acc = 0;
          for (index_t p = 0; p < H * W; ++p) acc += dyc[p] * xc[p];
          dwk[0] += acc;
          continue;
        }
        for (index_t ky = 0; ky < KH; ++ky) {
          const TapRange rows = tap_range(H, OH, SH, ky, PH);
          for (index_t kx = 0; kx < KW; ++kx) {
            const TapRange cols = tap_range(W, OW, SW, kx, PW);
            const index_t len = cols.hi - cols.lo;
            if (len <= 0) continue;
            T acc = 0;
            for (index_t oy = rows.lo; oy < rows.hi; ++oy) {
              const index_t iy = oy * SH + ky - PH;
              const T* xr = xc + iy * W + cols.first_in;
              const T* dr = dyc + oy * OW + cols.lo;
              if (SW == 1) {
                for (index_t i = 0; i < len; ++i) acc += dr[i] * xr[i];
              } else {
                for (index_t i = 0; i < len; ++i) acc += dr[i] * xr[i * SW];
              }
            }
            dwk[ky * KW + kx] += acc;
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_bias(const ConvGeometry& g, std::span<const T> grad_output,
                          std::span<T> grad_bias) {
  const index_t N = g.batch, Cout = g.out_channels, P = g.out_h * g.out_w;
  const T* dy = grad_output.data();
#pragma omp parallel for schedule(static)
  for (index_t co = 0; co < Cout; ++co) {
    T acc = 0;
    for (index_t n = 0; n < N; ++n) {
      const T* d = dy + (n * Cout + co) * P;
      for (index_t p = 0; p < P; ++p) acc += d[p];
    }
    grad_bias[co] += acc;
  }
}

template <typename T>
void max_pool2d_forward(const PoolGeometry& g, std::span<const T> input, std::span<T> output,
                        std::span<std::uint32_t> argmax) {
  const index_t planes = g.batch * g.channels;
  const index_t H = g.in_h, W = g.in_w, OH = g.out_h, OW = g.out_w;
  const index_t KH = g.spec.kernel_h, KW = g.spec.kernel_w;
  const index_t SH = g.spec.stride_h, SW = g.spec.stride_w;
  const index_t PH = g.spec.pad_h, PW = g.spec.pad_w;
#pragma omp parallel for schedule(static)
  for (index_t plane = 0; plane < planes; ++plane) {
    const T* x = input.data() + plane * H * W;
    T* y = output.data() + plane * OH * OW;
    std::uint32_t* arg = argmax.data() + plane * OH * OW;
    for (index_t oy = 0; oy < OH; ++oy) {
      const index_t y0 = std::max<index_t>(oy * SH - PH, 0);
      const index_t y1 = std::min<index_t>(oy * SH - PH + KH, H);
      for (index_t ox = 0; ox < OW; ++ox) {
        const index_t x0 = std::max<index_t>(ox * SW - PW, 0);
        const index_t x1 = std::min<index_t>(ox * SW - PW + KW, W);
        T best = -std::numeric_limits<T>::infinity();
        index_t best_idx = y0 * W + x0;
        for (index_t iy = y0; iy < y1; ++iy) {
          for (index_t ix = x0; ix < x1; ++ix) {
            const T v = x[iy * W + ix];
            if (v > best) {
              best = v;
              best_idx = iy * W + ix;
            }
          }
        }
        y[oy * OW + ox] = x[best_idx];
        arg[oy * OW + ox] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
}

template <typename T>
void max_pool2d_backward(const PoolGeometry& g, std::span<const T> grad_output,
                         std::span<const std::uint32_t> argmax, std::span<T> grad_input) {
  const index_t planes = g.batch * g.channels;
  const index_t in_plane = g.in_h * g.in_w, out_plane = g.out_h * g.out_w;
#pragma omp parallel for schedule(static)
  for (index_t plane = 0; plane < planes; ++plane) {
    const T* dy = grad_output.data() + plane * out_plane;
    const std::uint32_t* arg = argmax.data() + plane * out_plane;
    T* dx = grad_input.data() + plane * in_plane;
    for (index_t o = 0; o < out_plane; ++o) dx[arg[o]] += dy[o];
  }
}

#define AINX_INSTANTIATE(T)                                                                      \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,  \
                                  std::span<const T>, std::span<T>);                            \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>,               \
                                         std::span<const T>, std::span<T>);                     \
  template void conv2d_backward_weight<T>(const ConvGeometry&, std::span<const T>,              \
                                          std::span<const T>, std::span<T>);                    \
  template void conv2d_backward_bias<T>(const ConvGeometry&, std::span<const T>, std::span<T>); \
  template void max_pool2d_forward<T>(const PoolGeometry&, std::span<const T>, std::span<T>,    \
                                      std::span<std::uint32_t>);                                \
  template void max_pool2d_backward<T>(const PoolGeometry&, std::span<const T>,                 \
                                       std::span<const std::uint32_t>, std::span<T>);

AINX_INSTANTIATE(float)
AINX_INSTANTIATE(double)
#undef AINX_INSTANTIATE

}  // namespace kernels
}  // namespace ainx
