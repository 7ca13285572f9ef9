#include "ainx/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ainx::augment {

namespace {

std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

AugmentPolicy AugmentPolicy::defaults_for(std::size_t frames, std::size_t bins) {
  AugmentPolicy p;
  p.time_mask_max = std::min<std::size_t>(p.time_mask_max, frames / 8);
  p.freq_mask_max = std::min(p.freq_mask_max, bins);
  return p;
}

AugmentPolicy AugmentPolicy::disabled() {
  AugmentPolicy p;
  p.enabled = false;
  return p;
}

void AugmentPolicy::validate(std::size_t frames, std::size_t bins) const {
  if (freq_mask_max > bins) {
    throw std::invalid_argument("augment: freq_mask_max " + std::to_string(freq_mask_max) + " exceeds " +
                                std::to_string(bins) + " bins");
  }
  if (time_mask_max > frames) {
    throw std::invalid_argument("augment: time_mask_max " + std::to_string(time_mask_max) + " exceeds " +
                                std::to_string(frames) + " frames");
  }
}

void apply_freq_mask(dsp::Matrix& m, std::size_t start, std::size_t width, float value) {
  if (start + width > m.cols) throw std::invalid_argument("apply_freq_mask: mask runs past the last bin");
  for (std::size_t t = 0; t < m.rows; ++t) {
    std::fill_n(&m.values[t * m.cols + start], width, value);
  }
}

void apply_time_mask(dsp::Matrix& m, std::size_t start, std::size_t width, float value) {
  if (start + width > m.rows) throw std::invalid_argument("apply_time_mask: mask runs past the last frame");
  std::fill_n(m.values.begin() + std::ptrdiff_t(start * m.cols), width * m.cols, value);
}

dsp::Matrix warp_time_axis(const dsp::Matrix& m, std::size_t anchor, std::ptrdiff_t shift) {
  const std::size_t T = m.rows, F = m.cols;
  const double last = double(T) - 1.0;
  const double src_anchor = double(anchor);
  const double dst_anchor = src_anchor + double(shift);
  if (T < 2 || src_anchor <= 0 || src_anchor >= last || dst_anchor <= 0 || dst_anchor >= last) {
    throw std::invalid_argument("warp_time_axis: anchor and its image must lie strictly inside the time axis");
  }
  dsp::Matrix out(T, F);
  for (std::size_t t = 0; t < T; ++t) {
    const double d = double(t);
    // Invert the forward map to find the source position of output frame t.
    const double src = d <= dst_anchor ? d * src_anchor / dst_anchor
                                       : src_anchor + (d - dst_anchor) * (last - src_anchor) / (last - dst_anchor);
    const std::size_t i0 = std::min(std::size_t(std::floor(src)), T - 1);
    const std::size_t i1 = std::min(i0 + 1, T - 1);
    const float frac = float(src - double(i0));
    const float* a = &m.values[i0 * F];
    const float* b = &m.values[i1 * F];
    float* o = &out.values[t * F];
    if (frac == 0.0f) {
      std::copy_n(a, F, o);
    } else {
      for (std::size_t f = 0; f < F; ++f) o[f] = a[f] + frac * (b[f] - a[f]);
    }
  }
  return out;
}

dsp::Spectrogram freq_mask(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng) {
  policy.validate(spec.frames(), spec.bins());
  dsp::Spectrogram out = spec;
  for (std::size_t i = 0; i < policy.freq_masks; ++i) {
    const std::size_t width = draw(rng, 0, policy.freq_mask_max);
    const std::size_t start = draw(rng, 0, spec.bins() - width);
    apply_freq_mask(out.values, start, width, policy.mask_value);
  }
  return out;
}

dsp::Spectrogram time_mask(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng) {
  policy.validate(spec.frames(), spec.bins());
  dsp::Spectrogram out = spec;
  for (std::size_t i = 0; i < policy.time_masks; ++i) {
    const std::size_t width = draw(rng, 0, policy.time_mask_max);
    const std::size_t start = draw(rng, 0, spec.frames() - width);
    apply_time_mask(out.values, start, width, policy.mask_value);
  }
  return out;
}

dsp::Spectrogram time_warp(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng,
                           AugmentStats* stats) {
  const std::size_t W = policy.time_warp_w;
  if (W == 0) return spec;
  if (spec.frames() <= 2 * W) {
    if (stats) ++stats->warps_skipped;
    return spec;
  }
  const std::size_t anchor = draw(rng, W, spec.frames() - W - 1);
  const auto shift = std::uniform_int_distribution<std::ptrdiff_t>(-std::ptrdiff_t(W), std::ptrdiff_t(W))(rng);
  if (stats) ++stats->warps_applied;
  const std::ptrdiff_t last = std::ptrdiff_t(spec.frames()) - 1;
  const std::ptrdiff_t target = std::ptrdiff_t(anchor) + shift;
  // A destination on the boundary would collapse one segment; identity there.
  if (shift == 0 || target <= 0 || target >= last) return spec;
  dsp::Spectrogram out;
  out.config = spec.config;
  out.values = warp_time_axis(spec.values, anchor, shift);
  return out;
}

dsp::Spectrogram augment(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng,
                         AugmentStats* stats) {
  if (!policy.enabled) return spec;
  dsp::Spectrogram out = time_warp(spec, policy, rng, stats);
  out = freq_mask(out, policy, rng);
  return time_mask(out, policy, rng);
}

}  // namespace ainx::augment
