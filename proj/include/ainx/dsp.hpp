#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace ainx::dsp {

enum class MelScale { slaney, htk };

/// Settings for turning a waveform into a T x F log-mel spectrogram.
struct SpectrogramConfig {
  double sample_rate = 16000.0;
  double window_ms = 10.0;
  double hop_ms = 5.0;
  std::size_t n_mels = 128;
  /// 0 selects the smallest power of two >= the window that leaves every
  /// mel filter with at least one FFT bin.
  std::size_t n_fft = 0;
  double fmin = 0.0;
  /// 0 means sample_rate / 2.
  double fmax = 0.0;
  double clip_seconds = 2.08;
  double log_floor = 1e-10;
  MelScale mel_scale = MelScale::slaney;
  bool slaney_norm = true;

  /// 5.12 s clips, 20 ms window, 10 ms hop: 512 x 128.
  static SpectrogramConfig pretrain();
  /// 2.08 s clips, 10 ms window, 5 ms hop: 416 x 128.
  static SpectrogramConfig finetune();

  std::size_t window_samples() const;
  double hop_samples() const;
  std::size_t clip_samples() const;
  /// floor(samples / hop); at least one frame for any non-empty signal.
  std::size_t frames_for(std::size_t samples) const;
  /// Frame count of a full clip: clip_seconds * 1000 / hop_ms.
  std::size_t target_frames() const;
  double resolved_fmax() const;
  /// The FFT size actually used (resolves n_fft == 0).
  std::size_t resolved_n_fft() const;

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  bool operator==(const SpectrogramConfig&) const = default;
};

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f) : rows(r), cols(c), values(r * c, fill) {}
  float& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// T x F log-mel energies (F == n_mels) and the settings that produced them.
struct Spectrogram {
  Matrix values;
  SpectrogramConfig config;

  std::size_t frames() const { return values.rows; }
  std::size_t bins() const { return values.cols; }
  float at(std::size_t t, std::size_t f) const { return values(t, f); }
};

double hz_to_mel(double hz, MelScale scale);
double mel_to_hz(double mel, MelScale scale);

/// Hann-windowed power spectrum |FFT|^2, frames centered at t * hop with
/// reflect padding. Shape: frames_for(signal) x (n_fft / 2 + 1).
Matrix stft_power(std::span<const float> signal, const SpectrogramConfig& config);

/// Triangular mel filters, n_mels x (n_fft / 2 + 1). Throws
/// std::invalid_argument naming the first filter with no FFT bin.
Matrix mel_filterbank(const SpectrogramConfig& config);

/// log(max(mel . power, log_floor)).
Spectrogram log_mel(std::span<const float> signal, const SpectrogramConfig& config);

enum class CropMode { random, center };

/// Pads by repeating the last frame or crops to `target_frames`. Random
/// crops draw the offset from `rng`; centered crops start at (T - target)/2.
Spectrogram fit_to_frames(const Spectrogram& spec, std::size_t target_frames, CropMode mode,
                          std::mt19937_64& rng);

/// Uniformly placed window of clip_seconds; shorter signals are returned whole.
std::vector<float> random_clip(std::span<const float> signal, double clip_seconds, double sample_rate,
                               std::mt19937_64& rng);

/// Window of clip_seconds taken from the middle of the signal.
std::vector<float> center_clip(std::span<const float> signal, double clip_seconds, double sample_rate);

/// Linear-interpolation resampling.
std::vector<float> resample_linear(std::span<const float> signal, double from_rate, double to_rate);

/// Subtracts the mean of all cells, so that 0 is the spectrogram's mean level.
void center_in_place(Spectrogram& spec);

}  // namespace ainx::dsp
