#pragma once

#include <cstddef>
#include <random>

#include "ainx/dsp.hpp"

namespace ainx::augment {

/// SpecAugment settings. Masks write `mask_value`; spectrograms are
/// mean-centered before augmentation, so 0 is the mean level.
struct AugmentPolicy {
  std::size_t freq_mask_max = 27;
  std::size_t freq_masks = 2;
  std::size_t time_mask_max = 25;
  std::size_t time_masks = 2;
  std::size_t time_warp_w = 5;
  float mask_value = 0.0f;
  bool enabled = true;

  /// Default policy for a T x F input: time_mask_max is capped at T/8 and
  /// freq_mask_max at F.
  static AugmentPolicy defaults_for(std::size_t frames, std::size_t bins);
  static AugmentPolicy disabled();

  /// Throws std::invalid_argument when a mask is wider than its axis.
  void validate(std::size_t frames, std::size_t bins) const;

  bool operator==(const AugmentPolicy&) const = default;
};

/// Counts time warps skipped because the input was too short.
struct AugmentStats {
  std::size_t warps_applied = 0;
  std::size_t warps_skipped = 0;
};

/// Sets columns [start, start + width) to `value`.
void apply_freq_mask(dsp::Matrix& m, std::size_t start, std::size_t width, float value);
/// Sets rows [start, start + width) to `value`.
void apply_time_mask(dsp::Matrix& m, std::size_t start, std::size_t width, float value);

/// Piecewise-linear remap of the time axis fixing 0 and T-1 and sending
/// frame `anchor` to `anchor + shift`; rows are linearly interpolated.
dsp::Matrix warp_time_axis(const dsp::Matrix& m, std::size_t anchor, std::ptrdiff_t shift);

dsp::Spectrogram freq_mask(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng);
dsp::Spectrogram time_mask(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng);
/// Returns the input unchanged when T <= 2 * time_warp_w.
dsp::Spectrogram time_warp(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng,
                           AugmentStats* stats = nullptr);

/// time_warp, then freq_mask, then time_mask. Identity when disabled.
dsp::Spectrogram augment(const dsp::Spectrogram& spec, const AugmentPolicy& policy, std::mt19937_64& rng,
                         AugmentStats* stats = nullptr);

}  // namespace ainx::augment
